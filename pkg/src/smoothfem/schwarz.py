"""Overlapping domain decomposition and two-level additive Schwarz.

The nonoverlapping subdomains are the coarse grid cells (two coarse
triangles forming a square).  Each is extended by breadth-first layers of
fine elements, where a layer consists of all elements sharing at least one
node with the current region.  The local space of a subdomain holds the
free dofs of every node whose full element patch lies inside the extended
region: for the all-Dirichlet Poisson problem this is exactly the set of
nodes strictly interior to the region, and with a partial Dirichlet
boundary it keeps the free boundary nodes the decomposition must cover.

Three preconditioner variants share the structure z = sum_j R_j^T A_j^{-1}
R_j r plus a coarse solve: "standard" draws every local and the coarse
problem from the standard stiffness K, "enhanced" draws everything from the
smoothed stiffness Kbar, and "hybrid" combines smoothed local problems with
the standard coarse problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import constrained_nodes, free_dofs
from .exceptions import NotSPDError, NumericalError
from .sparse import SparseMatrix, cholesky

VARIANTS = ("standard", "enhanced", "hybrid")


@dataclass(frozen=True)
class Subdomain:
    """One overlapping subdomain: fine elements and its free-dof space."""

    index: int
    core_elements: np.ndarray     # fine elements of the coarse cell
    elements: np.ndarray          # fine elements after overlap growth
    dofs: np.ndarray              # free-dof indices (reduced numbering)


@dataclass(frozen=True)
class OverlapDecomposition:
    """Overlapping decomposition plus the coarse interpolation operator.

    ``R0T`` maps coarse free dofs to fine free dofs by nodal interpolation
    of the coarse P1 basis (rows sum to 1 wherever no constrained coarse
    node contributes).
    """

    subdomains: tuple
    R0T: sp.csr_matrix
    delta_layers: int
    H: float
    h: float
    free: np.ndarray              # fine free dof indices (full numbering)
    n_free: int
    n_coarse_free: int


def _node_element_incidence(mesh):
    rows = mesh.elements.ravel()
    cols = np.repeat(np.arange(mesh.num_elements), 3)
    data = np.ones(rows.shape[0], dtype=np.int8)
    return sp.csr_matrix((data, (rows, cols)),
                         shape=(mesh.num_nodes, mesh.num_elements))


def _grow_layers(incidence, core_mask, layers):
    in_set = core_mask.copy()
    for _ in range(layers):
        node_mask = (incidence @ in_set) > 0
        in_set = (incidence.T @ node_mask) > 0
    return in_set


def coarse_interpolation_nodes(hier):
    """Node-level interpolation matrix P (fine nodes x coarse nodes).

    Row p carries the coarse P1 basis values at fine node p, evaluated on
    the coarse ancestor element located through the refinement map, so no
    geometric search is involved.  Exact for nested refinements.
    """
    fine, coarse = hier.fine, hier.coarse
    first_el = np.full(fine.num_nodes, fine.num_elements, dtype=np.int64)
    np.minimum.at(first_el, fine.elements.ravel(),
                  np.repeat(np.arange(fine.num_elements), 3))
    anc = hier.fine_to_coarse[first_el]

    tri = coarse.nodes[coarse.elements[anc]]            # (nn, 3, 2)
    d1 = tri[:, 1] - tri[:, 0]
    d2 = tri[:, 2] - tri[:, 0]
    r = fine.nodes - tri[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    lam2 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    lam3 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    lam = np.column_stack([1.0 - lam2 - lam3, lam2, lam3])
    lam[np.abs(lam) < 1e-12] = 0.0

    rows = np.repeat(np.arange(fine.num_nodes), 3)
    cols = coarse.elements[anc].ravel()
    vals = lam.ravel()
    keep = vals != 0.0
    P = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])),
                      shape=(fine.num_nodes, coarse.num_nodes))
    P.sum_duplicates()
    return P


def _coarse_interpolation_free(hier, spec):
    """R0T on free dofs, replicated per displacement component."""
    P = coarse_interpolation_nodes(hier).tocoo()
    ndof = spec.ndof
    fine_free, fine_map = free_dofs(hier.fine, spec)
    coarse_free, coarse_map = free_dofs(hier.coarse, spec)

    rows, cols, vals = [], [], []
    for c in range(ndof):
        r = fine_map[ndof * P.row + c]
        q = coarse_map[ndof * P.col + c]
        keep = (r >= 0) & (q >= 0)
        rows.append(r[keep])
        cols.append(q[keep])
        vals.append(P.data[keep])
    R0T = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine_free.size, coarse_free.size))
    R0T.sum_duplicates()
    return R0T, fine_free, coarse_free


def decompose(hier, delta_layers, spec):
    """Build the overlapping decomposition of a refinement hierarchy.

    One subdomain per coarse cell (pair of consecutive coarse elements),
    grown by ``delta_layers`` node-connected layers of fine elements.
    Raises :class:`NumericalError` when a subdomain ends up with no
    interior free dofs (mesh too coarse for the requested overlap).
    """
    if delta_layers < 1:
        raise ValueError("delta_layers must be >= 1")
    coarse, fine = hier.coarse, hier.fine
    if coarse.num_elements % 2 != 0:
        raise ValueError("coarse mesh must pair elements into cells")
    n_cells = coarse.num_elements // 2
    if n_cells < 4:
        raise ValueError("need at least a 2 x 2 coarse grid")

    incidence = _node_element_incidence(fine)
    patch_sizes = np.array([p.size for p in fine.node_patches])
    constrained = np.repeat(constrained_nodes(fine, spec), spec.ndof)
    R0T, fine_free, _coarse_free = _coarse_interpolation_free(hier, spec)
    _, full_to_free = free_dofs(fine, spec)

    cells = hier.fine_to_coarse // 2
    subdomains = []
    for j in range(n_cells):
        core = cells == j
        grown = _grow_layers(incidence, core, delta_layers)
        covered = np.bincount(fine.elements[grown].ravel(),
                              minlength=fine.num_nodes)
        nodes = np.nonzero((covered > 0) & (covered == patch_sizes))[0]
        dof_ids = (spec.ndof * nodes[:, None]
                   + np.arange(spec.ndof)[None, :]).ravel()
        dof_ids = dof_ids[~constrained[dof_ids]]
        reduced = np.sort(full_to_free[dof_ids])
        if reduced.size == 0:
            raise NumericalError(
                f"subdomain {j} has no interior free dofs; the fine mesh is "
                "too coarse for the requested overlap")
        subdomains.append(Subdomain(
            index=j,
            core_elements=np.nonzero(core)[0],
            elements=np.nonzero(grown)[0],
            dofs=reduced,
        ))

    return OverlapDecomposition(
        subdomains=tuple(subdomains),
        R0T=R0T,
        delta_layers=int(delta_layers),
        H=coarse.h,
        h=fine.h,
        free=fine_free,
        n_free=fine_free.size,
        n_coarse_free=R0T.shape[1],
    )


class SchwarzPreconditioner:
    """Additive Schwarz operator z = R0^T A0^{-1} R0 r + sum_j R_j^T
    A_j^{-1} R_j r with precomputed factorizations.

    Immutable after construction; applies are deterministic (fixed
    subdomain order) and safe to run concurrently.
    """

    def __init__(self, variant, local_solves, coarse=None):
        self.variant = variant
        self._locals = tuple(local_solves)      # (dofs, CholeskyFactor)
        self._coarse = coarse                   # (R0T, CholeskyFactor) | None

    @property
    def num_subdomains(self):
        return len(self._locals)

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        if self._coarse is not None:
            R0T, factor = self._coarse
            z += R0T @ factor.solve(R0T.T @ r)
        for dofs, factor in self._locals:
            z[dofs] += factor.solve(r[dofs])
        return z

    def __call__(self, r):
        return self.apply(r)


def _factor_locals(decomp, src, label):
    factors = []
    for sub in decomp.subdomains:
        try:
            factors.append((sub.dofs, cholesky(src.submatrix(sub.dofs))))
        except NotSPDError as exc:
            raise NotSPDError(
                f"{label} local matrix of subdomain {sub.index} is not SPD; "
                "the decomposition is inconsistent") from exc
    return factors


def _factor_coarse(decomp, src, label):
    A0 = SparseMatrix(decomp.R0T.T @ src.tocsr() @ decomp.R0T)
    try:
        return decomp.R0T, cholesky(A0)
    except NotSPDError as exc:
        raise NotSPDError(f"{label} coarse matrix is not SPD") from exc


def build_preconditioner(variant, decomp, K, Kbar=None):
    """Assemble one preconditioner variant from post-BC matrices.

    standard: locals and coarse from K;
    enhanced: locals and coarse from Kbar;
    hybrid:   locals from Kbar, coarse from K.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if variant != "standard" and Kbar is None:
        raise ValueError(f"variant {variant!r} requires the smoothed matrix")
    local_src = K if variant == "standard" else Kbar
    coarse_src = Kbar if variant == "enhanced" else K
    locals_ = _factor_locals(decomp, local_src, variant)
    coarse = _factor_coarse(decomp, coarse_src, variant)
    return SchwarzPreconditioner(variant, locals_, coarse)


def build_all_variants(decomp, K, Kbar):
    """All three variants at once, sharing the factorizations."""
    k_locals = _factor_locals(decomp, K, "standard")
    kbar_locals = _factor_locals(decomp, Kbar, "enhanced")
    k_coarse = _factor_coarse(decomp, K, "standard")
    kbar_coarse = _factor_coarse(decomp, Kbar, "enhanced")
    return {
        "standard": SchwarzPreconditioner("standard", k_locals, k_coarse),
        "enhanced": SchwarzPreconditioner("enhanced", kbar_locals, kbar_coarse),
        "hybrid": SchwarzPreconditioner("hybrid", kbar_locals, k_coarse),
    }
