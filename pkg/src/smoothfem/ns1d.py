"""One-dimensional node-smoothing counterexample.

On a uniform partition of [0, 1] into n cells, the node-smoothed stiffness
is built from derivatives averaged over node-centered dual cells (width 1/n
inside, half-width at the ends).  Two explicit test vectors, an oscillating
one and a plateau one, pin the Rayleigh quotients to exactly 1/n and 3/4,
so the generalized condition number grows at least like 3n/4: no spectral
equivalence with the standard stiffness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .sparse import SparseMatrix
from .spectral import generalized_extremes_dense


@dataclass(frozen=True)
class Interval1DProblem:
    """Uniform partition of [0, 1] and the two probe vectors (interior
    dofs only; both endpoint values are constrained to zero)."""

    n: int
    nodes: np.ndarray
    oscillating: np.ndarray   # 0/1 alternating at interior nodes
    plateau: np.ndarray       # all ones at interior nodes

    @classmethod
    def create(cls, n):
        _check_n(n)
        u = np.zeros(n - 1)
        u[0::2] = 1.0          # interior node i=1,3,5,... carries value 1
        return cls(
            n=n,
            nodes=np.linspace(0.0, 1.0, n + 1),
            oscillating=u,
            plateau=np.ones(n - 1),
        )


def _check_n(n):
    if n < 4 or n % 2 != 0:
        raise ValueError("n must be even and >= 4")


def assemble_1d(n):
    """Standard and node-smoothed 1D stiffness matrices on interior dofs.

    The standard matrix is the tridiagonal n * (-1, 2, -1).  The smoothed
    one integrates, over each dual cell, the average of the two adjacent
    cell derivatives (the single adjacent derivative at the end nodes).
    """
    _check_n(n)
    h = 1.0 / n
    m = n - 1

    K = np.zeros((m, m))
    idx = np.arange(m)
    K[idx, idx] = 2.0 * n
    K[idx[:-1], idx[:-1] + 1] = -n
    K[idx[1:], idx[1:] - 1] = -n

    # Smoothed-derivative operator: one row per dual cell (n + 1 of them),
    # with the dual-cell width as quadrature weight.
    G = np.zeros((n + 1, m))
    w = np.full(n + 1, h)
    G[0, 0] = n                     # derivative of cell 0 is u_1 / h
    w[0] = h / 2.0
    for i in range(1, n):           # interior node i: (u_{i+1}-u_{i-1})/(2h)
        if i - 2 >= 0:
            G[i, i - 2] = -n / 2.0
        if i <= m - 1:
            G[i, i] = n / 2.0
    G[n, m - 1] = -n                # derivative of the last cell
    w[n] = h / 2.0
    Kns = G.T @ (w[:, None] * G)

    return SparseMatrix(K), SparseMatrix(Kns)


def rayleigh_quotients(n):
    """(u^T Kns u / u^T K u, v^T Kns v / v^T K v) for the two probes;
    equal to 1/n and 3/4 up to round-off."""
    prob = Interval1DProblem.create(n)
    K, Kns = assemble_1d(n)
    u, v = prob.oscillating, prob.plateau
    qu = float(u @ Kns.matvec(u)) / float(u @ K.matvec(u))
    qv = float(v @ Kns.matvec(v)) / float(v @ K.matvec(v))
    return qu, qv


def true_kappa_1d(n):
    """Dense generalized condition number kappa(K^{-1} Kns)."""
    K, Kns = assemble_1d(n)
    lmin, lmax = generalized_extremes_dense(K, Kns)
    if lmin <= 0.0:
        raise NumericalError("1D smoothed stiffness lost definiteness")
    return lmax / lmin


def kappa_lower_bound_1d(n):
    """Lower bound on kappa(K^{-1} Kns) from the two Rayleigh quotients.

    Returns (v-quotient) / (u-quotient) = 3n/4 and cross-checks that the
    dense condition number indeed dominates it.
    """
    qu, qv = rayleigh_quotients(n)
    bound = qv / qu
    if true_kappa_1d(n) < bound * (1.0 - 1e-12):
        raise NumericalError("dense condition number fell below the "
                             "Rayleigh-quotient bound")
    return bound
