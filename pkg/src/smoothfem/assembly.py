"""Stiffness and load assembly for Poisson and plane-stress elasticity.

Four stiffness flavors are produced on the same P1 space:

* standard:      sum_e |e| B_e^T B_e, the plain finite element matrix;
* edge-smoothed: gradients averaged over the two elements adjacent to each
  edge (area weights), integrated over the edge smoothing domains;
* strain-smoothed (element-based): per element, intermediate gradients
  averaged with each edge neighbor, combined pairwise at the three Gauss
  points and integrated with weight |e|/3;
* node-smoothed: gradients averaged over each node's element patch and
  integrated over the patch thirds.

For elasticity the identical area-weighted averaging is applied to each
strain component, i.e. the smoothed strain matrix is the strain composition
of the smoothed scalar-gradient operator, with the plane-stress constitutive
matrix sandwiched in every product.

All assemblers return the full (pre-boundary-condition) matrix; Dirichlet
conditions are imposed by eliminating constrained rows and columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import DegenerateMeshError
from .sparse import SparseMatrix

# 6-point, degree-4 triangle quadrature (barycentric points, weights
# normalized to sum 1; multiply by the element area).
_QA = 0.445948490915965
_QB = 0.091576213509771
_QWA = 0.223381589678011
_QWB = 0.109951743655322
TRI6_POINTS = np.array([
    [_QA, _QA, 1 - 2 * _QA],
    [_QA, 1 - 2 * _QA, _QA],
    [1 - 2 * _QA, _QA, _QA],
    [_QB, _QB, 1 - 2 * _QB],
    [_QB, 1 - 2 * _QB, _QB],
    [1 - 2 * _QB, _QB, _QB],
])
TRI6_WEIGHTS = np.array([_QWA, _QWA, _QWA, _QWB, _QWB, _QWB])


def poisson_load(x, y):
    """Body force with exact solution u = exp(8(x+y)) sin(pi x) sin(pi y)."""
    pi = np.pi
    sx, cx = np.sin(pi * x), np.cos(pi * x)
    sy, cy = np.sin(pi * y), np.cos(pi * y)
    return np.exp(8.0 * (x + y)) * (
        2.0 * (pi * pi - 64.0) * sx * sy - 16.0 * pi * (cx * sy + sx * cy))


def elasticity_load(x, y):
    """Body force b = (-y^2, 1 - x^2) for the plane-stress benchmark."""
    return np.stack([-y**2, 1.0 - x**2], axis=-1)


@dataclass(frozen=True)
class ProblemSpec:
    """What to assemble: governing problem, data, material, constraints.

    ``dirichlet`` is a vectorized predicate on coordinates; a node is
    constrained when it lies on the mesh boundary and the predicate holds.
    """

    kind: str                      # "poisson" | "elasticity"
    body_force: callable
    dirichlet: callable
    youngs_modulus: float = 1.0
    poisson_ratio: float = 0.0
    plane_stress: bool = True

    def __post_init__(self):
        if self.kind not in ("poisson", "elasticity"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if not (0.0 <= self.poisson_ratio < 0.5):
            raise ValueError("need 0 <= nu < 0.5")
        if self.youngs_modulus <= 0.0:
            raise ValueError("need E > 0")
        if self.kind == "elasticity" and not self.plane_stress:
            raise ValueError("only the plane-stress reduction is supported")

    @property
    def ndof(self):
        """Degrees of freedom per node."""
        return 1 if self.kind == "poisson" else 2

    def material_matrix(self):
        """Plane-stress constitutive matrix D."""
        E, nu = self.youngs_modulus, self.poisson_ratio
        return (E / (1.0 - nu * nu)) * np.array([
            [1.0, nu, 0.0],
            [nu, 1.0, 0.0],
            [0.0, 0.0, (1.0 - nu) / 2.0],
        ])


def poisson_benchmark():
    """Poisson problem of the benchmark suite: u = 0 on the whole boundary."""
    return ProblemSpec(
        kind="poisson",
        body_force=poisson_load,
        dirichlet=lambda x, y: np.ones_like(np.asarray(x), dtype=bool),
    )


def elasticity_benchmark():
    """Plane-stress benchmark: E = 1e3, nu = 0.2, clamped left edge x = -1."""
    return ProblemSpec(
        kind="elasticity",
        body_force=elasticity_load,
        dirichlet=lambda x, y: np.asarray(x) <= -1.0 + 1e-9,
        youngs_modulus=1.0e3,
        poisson_ratio=0.2,
    )


@dataclass(frozen=True)
class ElementGradient:
    """Constant P1 gradient operator of one element: grad u = B u."""

    B: np.ndarray        # (2, 3)
    area: float


def element_gradients(mesh):
    """Gradient operators of all elements: (ne, 2, 3) array plus areas."""
    p = mesh.nodes[mesh.elements]                       # (ne, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    two_a = 2.0 * mesh.areas
    B = np.empty((mesh.num_elements, 2, 3))
    B[:, 0, 0] = y[:, 1] - y[:, 2]
    B[:, 0, 1] = y[:, 2] - y[:, 0]
    B[:, 0, 2] = y[:, 0] - y[:, 1]
    B[:, 1, 0] = x[:, 2] - x[:, 1]
    B[:, 1, 1] = x[:, 0] - x[:, 2]
    B[:, 1, 2] = x[:, 1] - x[:, 0]
    B /= two_a[:, None, None]
    return B, mesh.areas


def element_gradient(mesh, e):
    """Gradient operator of element ``e`` (exact for linear fields)."""
    if not 0 <= e < mesh.num_elements:
        raise ValueError(f"element index {e} out of range")
    area = float(mesh.areas[e])
    if area <= 0.0:
        raise DegenerateMeshError(f"element {e} has non-positive area")
    B, _ = element_gradients(mesh)
    return ElementGradient(B=B[e], area=area)


def _strain_compose(G):
    """Strain operator from a scalar-gradient operator.

    Given G of shape (..., 2, s) acting on nodal scalars, returns the
    (..., 3, 2s) operator acting on interleaved (ux, uy) nodal values,
    with rows (eps_xx, eps_yy, gamma_xy).
    """
    s = G.shape[-1]
    out = np.zeros(G.shape[:-2] + (3, 2 * s))
    gx = G[..., 0, :]
    gy = G[..., 1, :]
    out[..., 0, 0::2] = gx
    out[..., 1, 1::2] = gy
    out[..., 2, 0::2] = gy
    out[..., 2, 1::2] = gx
    return out


def _node_dofs(node_idx, ndof):
    """Expand node indices (..., s) to dof indices (..., s * ndof)."""
    node_idx = np.asarray(node_idx)
    if ndof == 1:
        return node_idx
    out = np.stack([ndof * node_idx + c for c in range(ndof)], axis=-1)
    return out.reshape(node_idx.shape[:-1] + (node_idx.shape[-1] * ndof,))


class _Accumulator:
    """Collects (rows, cols, blocks) triplets and builds the CSR matrix."""

    def __init__(self, ndofs_total):
        self.n = ndofs_total
        self.rows = []
        self.cols = []
        self.vals = []

    def add(self, blocks, row_idx, col_idx):
        m, a, b = blocks.shape
        rows = np.broadcast_to(row_idx[:, :, None], (m, a, b))
        cols = np.broadcast_to(col_idx[:, None, :], (m, a, b))
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(blocks.ravel())

    def build(self):
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        return SparseMatrix.from_coo(rows, cols, vals, (self.n, self.n))


def _gram(P, Q, D=None):
    """Blocks P^T Q, or P^T D Q when a constitutive matrix is given."""
    if D is None:
        return np.einsum("eai,eaj->eij", P, Q)
    return np.einsum("eai,ab,ebj->eij", P, D, Q)


def _operators(mesh, spec):
    """Per-element gradient (Poisson) or strain (elasticity) operators."""
    B, areas = element_gradients(mesh)
    if spec.ndof == 1:
        return B, areas, None
    return _strain_compose(B), areas, spec.material_matrix()


def assemble_standard(mesh, spec):
    """Standard P1 stiffness matrix (pre-BC, full dof set)."""
    ops, areas, D = _operators(mesh, spec)
    acc = _Accumulator(spec.ndof * mesh.num_nodes)
    blocks = _gram(ops, ops, D) * areas[:, None, None]
    idx = _node_dofs(mesh.elements, spec.ndof)
    acc.add(blocks, idx, idx)
    return acc.build()


def assemble_es(mesh, spec):
    """Edge-smoothed stiffness matrix (pre-BC).

    Interior edge between elements e1, e2: the smoothed operator is the
    area-weighted average of the element operators, integrated over
    |s| = (|e1| + |e2|) / 3; the quadratic form expands into the four
    pairwise element blocks.  Boundary edges reduce to a rescaled standard
    element contribution, |e1| / 3.
    """
    ops, areas, D = _operators(mesh, spec)
    dofs = _node_dofs(mesh.elements, spec.ndof)
    acc = _Accumulator(spec.ndof * mesh.num_nodes)

    interior = mesh.edge_elements[:, 1] >= 0
    e1 = mesh.edge_elements[interior, 0]
    e2 = mesh.edge_elements[interior, 1]
    a1, a2 = areas[e1], areas[e2]
    total = a1 + a2
    s_area = total / 3.0
    w1 = a1 / total
    w2 = a2 / total
    for ei, wi in ((e1, w1), (e2, w2)):
        for ej, wj in ((e1, w1), (e2, w2)):
            blocks = _gram(ops[ei], ops[ej], D) * (s_area * wi * wj)[:, None, None]
            acc.add(blocks, dofs[ei], dofs[ej])

    eb = mesh.edge_elements[~interior, 0]
    if eb.size:
        blocks = _gram(ops[eb], ops[eb], D) * (areas[eb] / 3.0)[:, None, None]
        acc.add(blocks, dofs[eb], dofs[eb])
    return acc.build()


def _sse_gauss_operators(mesh):
    """Scalar-gradient operators at the three Gauss points of every element.

    Returns (gauss_ops, stencil): gauss_ops is (3, ne, 2, 6) over the
    6-node stencil [v0, v1, v2, w0, w1, w2] where wk is the vertex of
    neighbor k opposite the shared edge; stencil slots of missing neighbors
    alias the element's own first vertex and carry zero columns.
    """
    B, areas = element_gradients(mesh)
    ne = mesh.num_elements
    elements = mesh.elements
    neighbors = mesh.element_neighbors

    stencil = np.empty((ne, 6), dtype=np.int64)
    stencil[:, :3] = elements
    stencil[:, 3:] = elements[:, [0]]                   # placeholder slots

    own = np.zeros((ne, 2, 6))
    own[:, :, :3] = B

    intermediate = []
    for k in range(3):
        nk = neighbors[:, k]
        mask = nk >= 0
        ghat = own.copy()
        if np.any(mask):
            rows = np.nonzero(mask)[0]
            nb = nk[rows]
            nb_verts = elements[nb]                     # (m, 3)
            vk = elements[rows, k][:, None]
            vk1 = elements[rows, (k + 1) % 3][:, None]
            pos = np.where(nb_verts == vk, k,
                           np.where(nb_verts == vk1, (k + 1) % 3, 3 + k))
            opp_slot = np.argmax(pos == 3 + k, axis=1)
            stencil[rows, 3 + k] = nb_verts[np.arange(rows.size), opp_slot]

            nb_ext = np.zeros((rows.size, 2, 6))
            for t in range(3):
                nb_ext[np.arange(rows.size), :, pos[:, t]] = B[nb][:, :, t]
            wa = areas[rows] / (areas[rows] + areas[nb])
            wb = areas[nb] / (areas[rows] + areas[nb])
            ghat[rows] = (wa[:, None, None] * own[rows]
                          + wb[:, None, None] * nb_ext)
        intermediate.append(ghat)

    # Gauss value k pairs intermediate gradients (k-1, k), cyclically.
    pairs = ((2, 0), (0, 1), (1, 2))
    gauss = np.stack([0.5 * (intermediate[a] + intermediate[b])
                      for a, b in pairs])
    return gauss, stencil


def assemble_sse(mesh, spec):
    """Element-based strain-smoothed stiffness matrix (pre-BC).

    Each Gauss-point operator enters with equal weight |e| / 3, so the sum
    is invariant under relabeling of the local edges.  An element without
    neighbors reproduces the standard element matrix exactly.
    """
    gauss, stencil = _sse_gauss_operators(mesh)
    areas = mesh.areas
    D = spec.material_matrix() if spec.ndof == 2 else None
    if spec.ndof == 2:
        gauss = np.stack([_strain_compose(g) for g in gauss])

    blocks = sum(_gram(g, g, D) for g in gauss)
    blocks *= (areas / 3.0)[:, None, None]
    idx = _node_dofs(stencil, spec.ndof)
    acc = _Accumulator(spec.ndof * mesh.num_nodes)
    acc.add(blocks, idx, idx)
    return acc.build()


def assemble_ns(mesh, spec):
    """Node-smoothed stiffness matrix (pre-BC).

    Per node, the patch gradients are averaged with area weights and
    integrated over the patch third, |s| = sum_k |e_k| / 3.
    """
    B, areas = element_gradients(mesh)
    D = spec.material_matrix() if spec.ndof == 2 else None
    acc = _Accumulator(spec.ndof * mesh.num_nodes)

    for p in range(mesh.num_nodes):
        els = mesh.node_patches[p]
        if els.size == 0:
            continue
        a = areas[els]
        w = a / a.sum()
        s_area = a.sum() / 3.0

        stencil, inv = np.unique(mesh.elements[els].ravel(),
                                 return_inverse=True)
        inv = inv.reshape(-1, 3)
        G = np.zeros((2, stencil.size))
        for k in range(els.size):
            G[:, inv[k]] += w[k] * B[els[k]]
        if spec.ndof == 2:
            G = _strain_compose(G)
            block = s_area * (G.T @ D @ G)
        else:
            block = s_area * (G.T @ G)
        idx = _node_dofs(stencil[None, :], spec.ndof)
        acc.add(block[None, :, :], idx, idx)
    return acc.build()


def assemble_load(mesh, spec):
    """Load vector from the body force, 6-point degree-4 quadrature.

    The same vector serves all four stiffness flavors.
    """
    F = np.zeros(spec.ndof * mesh.num_nodes)
    p = mesh.nodes[mesh.elements]                       # (ne, 3, 2)
    for lam, wq in zip(TRI6_POINTS, TRI6_WEIGHTS):
        xq = np.einsum("k,ekd->ed", lam, p)
        fq = spec.body_force(xq[:, 0], xq[:, 1])
        scale = mesh.areas * wq
        for i in range(3):
            if spec.ndof == 1:
                np.add.at(F, mesh.elements[:, i], scale * lam[i] * fq)
            else:
                for c in range(2):
                    np.add.at(F, 2 * mesh.elements[:, i] + c,
                              scale * lam[i] * fq[:, c])
    return F


def constrained_nodes(mesh, spec):
    """Boolean mask of nodes held at zero by the Dirichlet condition."""
    on_segment = spec.dirichlet(mesh.nodes[:, 0], mesh.nodes[:, 1])
    return mesh.boundary & np.asarray(on_segment, dtype=bool)


def free_dofs(mesh, spec):
    """Free dof indices and the full-to-free map (-1 for constrained)."""
    mask = np.repeat(constrained_nodes(mesh, spec), spec.ndof)
    free = np.nonzero(~mask)[0]
    full_to_free = np.full(mask.shape[0], -1, dtype=np.int64)
    full_to_free[free] = np.arange(free.size)
    return free, full_to_free


def apply_dirichlet(A, f, mesh, spec):
    """Eliminate constrained dofs; returns (A_free, f_free, free_indices).

    The reduced matrix is symmetric positive definite for all four
    stiffness flavors on the benchmark problems.
    """
    free, _ = free_dofs(mesh, spec)
    if free.size == 0:
        raise ValueError("Dirichlet condition leaves no free dofs")
    return A.submatrix(free), np.asarray(f)[free], free


def export_matrixmarket(A, path):
    """Write a symmetric MatrixMarket coordinate file."""
    scipy.io.mmwrite(str(path), A.tocsr(), symmetry="symmetric")


def assemble(mesh, spec, method):
    """Dispatch on the method name: fem | esfem | sse | nsfem."""
    table = {
        "fem": assemble_standard,
        "esfem": assemble_es,
        "sse": assemble_sse,
        "nsfem": assemble_ns,
    }
    if method not in table:
        raise ValueError(f"unknown method {method!r}")
    return table[method](mesh, spec)
