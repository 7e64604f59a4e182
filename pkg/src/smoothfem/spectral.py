"""Extremal generalized eigenvalues of SPD pencils (B x = lambda A x).

The workhorse is a Lanczos iteration in the A-inner product applied to the
A-self-adjoint operator A^{-1} B, with full reorthogonalization and direct
A-solves.  On breakdown (invariant subspace) the iteration restarts with a
fresh random vector, accumulating Ritz values across segments, so tiny and
highly clustered spectra terminate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .sparse import SparseMatrix, cholesky


@dataclass(frozen=True)
class SpectrumEstimate:
    """Extremal generalized eigenvalues of a pencil and their ratio."""

    lambda_min: float
    lambda_max: float
    kappa: float
    method: str            # "lanczos" | "dense"
    converged: bool
    iterations: int


def _segment_extremes(diag, off):
    if len(diag) == 1:
        return diag[0], diag[0]
    eigs = scipy.linalg.eigvalsh_tridiagonal(np.asarray(diag),
                                             np.asarray(off))
    return float(eigs[0]), float(eigs[-1])


def _pencil_extremes_lanczos(A, B, tol=1e-8, max_iter=500, window=5,
                             min_iter=15, seed=0):
    """Extremes of B x = lambda A x; returns (lmin, lmax, converged, its)."""
    n = A.shape[0]
    factor = cholesky(A)
    rng = np.random.default_rng(seed)
    max_iter = min(max_iter, n)
    min_iter = min(min_iter, n)

    basis = []        # A-orthonormal Lanczos vectors across all segments
    a_basis = []      # A @ v for each basis vector
    segments = []     # finished (diag, off) tridiagonal segments
    diag, off = [], []
    history = []

    def fresh_vector():
        for _ in range(40):
            w = rng.standard_normal(n)
            if basis:
                V = np.column_stack(basis)
                AV = np.column_stack(a_basis)
                w -= V @ (AV.T @ w)
                w -= V @ (AV.T @ w)
            Aw = A.matvec(w)
            norm = np.sqrt(max(w @ Aw, 0.0))
            if norm > 1e-10 * max(1.0, np.linalg.norm(w)):
                return w / norm, Aw / norm
        return None, None

    v, Av = fresh_vector()
    v_prev = None
    beta_prev = 0.0
    iterations = 0
    converged = False

    while iterations < max_iter:
        bv = B.matvec(v)
        w = factor.solve(bv)
        alpha = float(v @ bv)
        w = w - alpha * v
        if v_prev is not None:
            w -= beta_prev * v_prev
        if basis:
            V = np.column_stack(basis)
            AV = np.column_stack(a_basis)
            w -= V @ (AV.T @ w)
            w -= V @ (AV.T @ w)
        basis.append(v)
        a_basis.append(Av)
        diag.append(alpha)
        iterations += 1

        Aw = A.matvec(w)
        beta = float(np.sqrt(max(w @ Aw, 0.0)))

        ext = [_segment_extremes(d, o) for d, o in segments]
        ext.append(_segment_extremes(diag, off))
        lmin = min(e[0] for e in ext)
        lmax = max(e[1] for e in ext)
        history.append((lmin, lmax))

        if iterations >= min_iter and len(history) > window:
            recent = history[-(window + 1):]
            drift_min = max(abs(a[0] - b[0]) for a, b in zip(recent, recent[1:]))
            drift_max = max(abs(a[1] - b[1]) for a, b in zip(recent, recent[1:]))
            if (drift_min <= tol * max(abs(lmin), 1e-300)
                    and drift_max <= tol * abs(lmax)):
                converged = True
                break
        if len(basis) >= n:
            converged = True   # Krylov space complete, extremes exact
            break

        if beta <= 1e-13 * max(abs(alpha), 1.0):
            # invariant subspace: close this segment, restart
            segments.append((diag, off))
            diag, off = [], []
            v, Av = fresh_vector()
            if v is None:
                converged = True
                break
            v_prev, beta_prev = None, 0.0
        else:
            off.append(beta)
            v_prev, beta_prev = v, beta
            v, Av = w / beta, Aw / beta

    lmin, lmax = history[-1]
    return lmin, lmax, converged, iterations


def generalized_extremes_dense(A, B):
    """Dense oracle: extreme eigenvalues of B x = lambda A x."""
    eigs = scipy.linalg.eigh(B.toarray(), A.toarray(), eigvals_only=True)
    return float(eigs[0]), float(eigs[-1])


def generalized_kappa(A, B, tol=1e-8, max_iter=500, seed=0, method="lanczos"):
    """Generalized condition number kappa = lambda_max / lambda_min of
    B x = lambda A x for an SPD pencil.

    ``method="dense"`` computes the full spectrum (small dimensions only).
    The Lanczos route declares convergence when both extreme Ritz values
    move by less than ``tol`` (relative) over 5 consecutive steps.
    """
    if A.shape != B.shape:
        raise ValueError("pencil matrices must have equal shapes")
    if method == "dense":
        lmin, lmax = generalized_extremes_dense(A, B)
        converged, iterations = True, A.shape[0]
    elif method == "lanczos":
        lmin, lmax, converged, iterations = _pencil_extremes_lanczos(
            A, B, tol=tol, max_iter=max_iter, seed=seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    if lmin <= 0.0:
        raise ValueError(f"pencil is not positive definite: "
                         f"lambda_min = {lmin:.3e}")
    return SpectrumEstimate(
        lambda_min=lmin,
        lambda_max=lmax,
        kappa=lmax / lmin,
        method=method,
        converged=converged,
        iterations=iterations,
    )


def _coarse_matrix(src, R0T):
    return SparseMatrix(R0T.T @ src.tocsr() @ R0T)


def local_lambda_max(decomp, K, Kbar, tol=1e-8, max_iter=500, seed=0):
    """lambda_max(K_j^{-1} Kbar_j) per subproblem; index 0 is the coarse
    problem, indices 1..N the subdomains."""
    values = []
    K0 = _coarse_matrix(K, decomp.R0T)
    Kbar0 = _coarse_matrix(Kbar, decomp.R0T)
    lmax = _pencil_extremes_lanczos(K0, Kbar0, tol=tol, max_iter=max_iter,
                                    seed=seed)[1]
    values.append(lmax)
    for sub in decomp.subdomains:
        Kj = K.submatrix(sub.dofs)
        Kbarj = Kbar.submatrix(sub.dofs)
        lmax = _pencil_extremes_lanczos(Kj, Kbarj, tol=tol,
                                        max_iter=max_iter, seed=seed)[1]
        values.append(lmax)
    return np.asarray(values)


def local_omega0(decomp, K, Kbar, tol=1e-8, max_iter=500, seed=0):
    """The local spectral bound omega_0 = max_j lambda_max(K_j^{-1} Kbar_j),
    maximized over the coarse problem and all subdomains."""
    return float(local_lambda_max(decomp, K, Kbar, tol=tol,
                                  max_iter=max_iter, seed=seed).max())
