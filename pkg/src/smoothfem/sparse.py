"""Sparse SPD linear algebra: CSR storage, direct factorization, PCG.

The heavy lifting (CSR kernels, the no-pivot symmetric LU that realizes a
sparse Cholesky factorization) is delegated to scipy; this module pins the
contracts the rest of the package relies on, in particular the PCG stop
criterion on the unpreconditioned relative residual and the Lanczos
condition-number estimate recovered from the CG coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import hashlib

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigvalsh_tridiagonal

from .exceptions import NotSPDError


class SparseMatrix:
    """Compressed-sparse-row matrix with a symmetry flag.

    Thin immutable wrapper over a scipy CSR matrix that exposes the raw
    ``indptr`` / ``indices`` / ``data`` arrays.  Stiffness matrices are
    stored in full (both triangles).
    """

    def __init__(self, mat, symmetric=True):
        mat = sp.csr_matrix(mat)
        mat.sum_duplicates()
        mat.sort_indices()
        mat.data.flags.writeable = False
        mat.indices.flags.writeable = False
        mat.indptr.flags.writeable = False
        self._mat = mat
        self.symmetric = bool(symmetric)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, symmetric=True):
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=shape), symmetric)

    @property
    def shape(self):
        return self._mat.shape

    @property
    def indptr(self):
        return self._mat.indptr

    @property
    def indices(self):
        return self._mat.indices

    @property
    def data(self):
        return self._mat.data

    @property
    def nnz(self):
        return self._mat.nnz

    def matvec(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.shape[1]:
            raise ValueError(f"dimension mismatch: {self.shape} @ {x.shape}")
        return self._mat @ x

    def __matmul__(self, x):
        return self.matvec(x)

    def tocsr(self):
        """The underlying scipy CSR matrix (do not mutate)."""
        return self._mat

    def toarray(self):
        return self._mat.toarray()

    def submatrix(self, idx):
        """The principal submatrix on the index set ``idx``."""
        idx = np.asarray(idx)
        return SparseMatrix(self._mat[idx][:, idx], symmetric=self.symmetric)

    def max_abs(self):
        return float(np.abs(self._mat.data).max()) if self._mat.nnz else 0.0

    def checksum(self):
        """SHA-256 over the CSR arrays; identifies the matrix exactly."""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.shape, dtype=np.int64).tobytes())
        digest.update(self._mat.indptr.tobytes())
        digest.update(self._mat.indices.tobytes())
        digest.update(self._mat.data.tobytes())
        return digest.hexdigest()

    def __repr__(self):
        return (f"SparseMatrix(shape={self.shape}, nnz={self.nnz}, "
                f"symmetric={self.symmetric})")


def spmv(A, x):
    """Matrix-vector product, dimension-checked."""
    if isinstance(A, SparseMatrix):
        return A.matvec(x)
    return sp.csr_matrix(A) @ np.asarray(x)


@dataclass
class CholeskyFactor:
    """Sparse Cholesky factorization of an SPD matrix.

    Realized through scipy's SuperLU in symmetric mode without numerical
    pivoting: P A P^T = L L^T with a fill-reducing permutation P.
    """

    n: int
    _lu: spla.SuperLU

    @cached_property
    def perm(self):
        """Fill-reducing ordering p such that A[p][:, p] = L L^T."""
        return np.argsort(self._lu.perm_c)

    @cached_property
    def lower(self):
        """The lower-triangular factor L with A[p][:, p] = L L^T, as CSR."""
        dU = self._lu.U.diagonal()
        return (self._lu.L @ sp.diags(np.sqrt(dU))).tocsr()

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: factor of size {self.n}, "
                             f"rhs of size {b.shape[0]}")
        return self._lu.solve(b)


def cholesky(A):
    """Factorize a symmetric positive definite :class:`SparseMatrix`.

    Raises :class:`NotSPDError` on a non-positive pivot, which typically
    signals a boundary-elimination bug or a singular subdomain problem.
    """
    csc = A.tocsr().tocsc()
    n = csc.shape[0]
    lu = spla.splu(csc, diag_pivot_thresh=0.0, permc_spec="MMD_AT_PLUS_A",
                   options=dict(SymmetricMode=True))
    dU = lu.U.diagonal()
    if not np.all(dU > 0.0):
        raise NotSPDError("matrix not SPD")
    return CholeskyFactor(n=n, _lu=lu)


@dataclass
class SolveReport:
    """Outcome of a (preconditioned) conjugate gradient solve.

    ``residuals`` holds the relative unpreconditioned residual history,
    starting at 1.0 for the zero initial guess.  ``lanczos_kappa`` is the
    condition-number estimate of the preconditioned operator recovered from
    the CG coefficients; with fewer than 2 iterations it degenerates to 1.0
    (or None when no iteration ran).
    """

    iterations: int
    residuals: np.ndarray
    lanczos_kappa: float | None
    converged: bool
    alphas: tuple = field(repr=False, default=())
    betas: tuple = field(repr=False, default=())


def _resolve_preconditioner(precond):
    if precond is None:
        return lambda r: r
    if hasattr(precond, "apply"):
        return precond.apply
    if hasattr(precond, "solve"):
        return precond.solve
    if callable(precond):
        return precond
    raise TypeError(f"cannot use {precond!r} as a preconditioner")


def pcg(A, f, precond=None, tol=1e-12, max_iter=None):
    """Preconditioned conjugate gradients with zero initial guess.

    Stops when ||f - A x_k|| / ||f|| < tol in the euclidean norm of the
    plain (unpreconditioned) residual, which the standard PCG recursion
    tracks directly.  Records the alpha/beta coefficients for the Lanczos
    condition-number estimate.
    """
    matvec = A.matvec if hasattr(A, "matvec") else (lambda x: A @ x)
    apply_m = _resolve_preconditioner(precond)
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if max_iter is None:
        max_iter = max(1000, 2 * n)

    x = np.zeros(n)
    fnorm = np.linalg.norm(f)
    if fnorm == 0.0:
        return x, SolveReport(0, np.array([0.0]), None, True)

    r = f.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    if rz <= 0.0:
        raise NotSPDError("preconditioner is not positive definite")

    residuals = [1.0]
    alphas, betas = [], []
    converged = False
    for _ in range(max_iter):
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise NotSPDError("matrix is not positive definite")
        alpha = rz / pAp
        alphas.append(alpha)
        x += alpha * p
        r -= alpha * Ap
        rel = float(np.linalg.norm(r) / fnorm)
        residuals.append(rel)
        if rel < tol:
            converged = True
            break
        z = apply_m(r)
        rz_next = float(r @ z)
        if rz_next <= 0.0:
            raise NotSPDError("preconditioner is not positive definite")
        betas.append(rz_next / rz)
        rz = rz_next
        p = z + betas[-1] * p

    betas = betas[:len(alphas) - 1]        # drop the beta of an unrun step
    kappa = lanczos_kappa(alphas, betas) if alphas else None
    return x, SolveReport(
        iterations=len(alphas),
        residuals=np.asarray(residuals),
        lanczos_kappa=kappa,
        converged=converged,
        alphas=tuple(alphas),
        betas=tuple(betas),
    )


def lanczos_kappa(alphas, betas):
    """Condition-number estimate from PCG coefficients.

    Builds the Lanczos tridiagonal with diagonal 1/a_k + b_{k-1}/a_{k-1}
    and off-diagonal sqrt(b_k)/a_k, and returns the ratio of its extreme
    eigenvalues.  A single recorded iteration yields the degenerate
    estimate 1.0, only meaningful for operators with a one-point spectrum.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    m = alphas.shape[0]
    if m < 1:
        raise ValueError("need at least 1 CG iteration for an estimate")
    if betas.shape[0] != m - 1:
        raise ValueError("expected one beta fewer than alphas")
    if m == 1:
        return 1.0
    d = np.empty(m)
    d[0] = 1.0 / alphas[0]
    d[1:] = 1.0 / alphas[1:] + betas / alphas[:-1]
    e = np.sqrt(betas) / alphas[:-1]
    eigs = eigvalsh_tridiagonal(d, e)
    lmin, lmax = float(eigs[0]), float(eigs[-1])
    if lmin <= 0.0:
        raise NotSPDError("Lanczos tridiagonal is not positive definite")
    return lmax / lmin
