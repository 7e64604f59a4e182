"""Triangulations of the square (-1, 1)^2 and their adjacency tables.

Provides the structured checkerboard generator, a seeded node-perturbation
variant, uniform (midpoint) refinement with a coarse/fine hierarchy, and the
edge-based smoothing domains used by the edge-smoothed stiffness assembler.
Meshes are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateMeshError

SIDE_LENGTH = 2.0  # side of the square (-1, 1)^2
DOMAIN_AREA = SIDE_LENGTH**2

# Local edge k of a triangle (v0, v1, v2): edge 0 = (v0, v1), 1 = (v1, v2),
# 2 = (v2, v0).  Neighbor k of an element shares local edge k.
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _signed_areas(nodes, elements):
    p = nodes[elements]
    return 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Mesh:
    """A triangulation with the adjacency tables the assemblers need.

    Attributes
    ----------
    nodes : (num_nodes, 2) float array of coordinates.
    elements : (num_elements, 3) int array, counterclockwise node triples.
    boundary : (num_nodes,) bool array, True for nodes on the domain boundary.
    h : characteristic element size (side length / generating n).
    edges : (num_edges, 2) int array of sorted node pairs.
    edge_elements : (num_edges, 2) int array of adjacent elements; second
        entry is -1 for boundary edges.
    element_edges : (num_elements, 3) int array, edge index of local edge k.
    element_neighbors : (num_elements, 3) int array, element across local
        edge k, or -1.
    node_patches : tuple of int arrays, elements adjacent to each node.
    areas : (num_elements,) element areas, all positive.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    h: float
    edges: np.ndarray
    edge_elements: np.ndarray
    element_edges: np.ndarray
    element_neighbors: np.ndarray
    node_patches: tuple
    areas: np.ndarray

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    @property
    def num_elements(self):
        return self.elements.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def __repr__(self):
        return (f"Mesh(num_nodes={self.num_nodes}, "
                f"num_elements={self.num_elements}, h={self.h:g})")


@dataclass(frozen=True)
class Hierarchy:
    """A fine mesh nested in a coarse mesh by uniform refinement.

    ``fine_to_coarse`` maps every fine element to its coarse ancestor;
    ``coarse_node_to_fine`` maps coarse node indices to fine node indices
    (refinement keeps original nodes first, so this is the identity prefix).
    """

    coarse: Mesh
    fine: Mesh
    fine_to_coarse: np.ndarray
    coarse_node_to_fine: np.ndarray
    levels: int

    @property
    def H(self):
        return self.coarse.h

    @property
    def h(self):
        return self.fine.h


@dataclass(frozen=True)
class EdgeDomain:
    """An edge-based smoothing domain: the union of the barycentric thirds
    of the one or two elements adjacent to an edge."""

    edge: int
    nodes: tuple
    elements: tuple
    area: float


def _build_mesh(nodes, elements, h, boundary=None, min_area=1e-10):
    """Validate geometry and derive all adjacency tables."""
    nodes = np.asarray(nodes, dtype=float)
    elements = np.asarray(elements, dtype=np.int64)
    areas = _signed_areas(nodes, elements)
    if np.any(areas <= min_area):
        worst = float(areas.min())
        raise DegenerateMeshError(
            f"element with signed area {worst:.3e} <= {min_area:.0e}; "
            "elements must be counterclockwise and non-degenerate")

    ne = elements.shape[0]
    nn = nodes.shape[0]

    local = elements[:, LOCAL_EDGES]                    # (ne, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    element_edges = inverse.reshape(ne, 3)

    edge_elements = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    flat_eid = element_edges.ravel()
    owner = np.repeat(np.arange(ne), 3)
    order = np.argsort(flat_eid, kind="stable")
    sorted_eid = flat_eid[order]
    sorted_owner = owner[order]
    first = np.ones(sorted_eid.shape[0], dtype=bool)
    first[1:] = sorted_eid[1:] != sorted_eid[:-1]
    edge_elements[sorted_eid[first], 0] = sorted_owner[first]
    second = ~first
    if np.any(second & np.concatenate(([False], second[:-1]))):
        raise DegenerateMeshError("an edge is shared by more than 2 elements")
    edge_elements[sorted_eid[second], 1] = sorted_owner[second]

    adj = edge_elements[element_edges]                  # (ne, 3, 2)
    own = np.arange(ne)[:, None]
    element_neighbors = np.where(adj[:, :, 0] == own, adj[:, :, 1], adj[:, :, 0])

    if boundary is None:
        boundary = np.zeros(nn, dtype=bool)
        boundary[edges[edge_elements[:, 1] < 0].ravel()] = True
    else:
        boundary = np.asarray(boundary, dtype=bool)

    node_order = np.argsort(elements.ravel(), kind="stable")
    counts = np.bincount(elements.ravel(), minlength=nn)
    splits = np.cumsum(counts)[:-1]
    patches = tuple(_freeze(p) for p in
                    np.split(owner[node_order], splits))

    return Mesh(
        nodes=_freeze(nodes),
        elements=_freeze(elements),
        boundary=_freeze(boundary),
        h=float(h),
        edges=_freeze(edges),
        edge_elements=_freeze(edge_elements),
        element_edges=_freeze(element_edges),
        element_neighbors=_freeze(element_neighbors),
        node_patches=patches,
        areas=_freeze(areas),
    )


def build_structured(n):
    """Checkerboard triangulation of (-1, 1)^2 with 2*n*n elements.

    Every grid cell is split along the diagonal from its lower-left to its
    upper-right corner, so the pattern is uniform across the grid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    coords = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(coords, coords)                  # X[j, i] = coords[i]
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b = a + 1
    c = b + (n + 1)
    d = a + (n + 1)
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return _build_mesh(nodes, elements, h=SIDE_LENGTH / n)


def build_unstructured(N, seed):
    """Structured mesh whose interior nodes get a seeded random offset.

    Each interior node moves by at most 0.25 * (L / N) per coordinate;
    boundary nodes stay put.  Raises ``DegenerateMeshError`` if the offsets
    make any element (nearly) degenerate; retry with another seed.
    """
    if N < 2:
        raise ValueError("N must be >= 2 for an unstructured mesh")
    base = build_structured(N)
    H = SIDE_LENGTH / N
    rng = np.random.default_rng(seed)
    interior = ~base.boundary
    offsets = rng.uniform(-0.25 * H, 0.25 * H, size=(int(interior.sum()), 2))
    nodes = base.nodes.copy()
    nodes[interior] += offsets
    return _build_mesh(nodes, base.elements, h=base.h)


def _refine_once(mesh):
    """Split every triangle into 4 via edge midpoints.

    Returns the refined mesh and the child-to-parent element map.  Original
    nodes keep their indices; midpoints are appended in edge order.
    """
    nn = mesh.num_nodes
    mid = 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mid])

    m = nn + mesh.element_edges                         # (ne, 3) midpoint ids
    v = mesh.elements
    children = np.stack([
        np.column_stack([v[:, 0], m[:, 0], m[:, 2]]),
        np.column_stack([m[:, 0], v[:, 1], m[:, 1]]),
        np.column_stack([m[:, 2], m[:, 1], v[:, 2]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ], axis=1)                                          # (ne, 4, 3)
    elements = children.reshape(-1, 3)
    parents = np.repeat(np.arange(mesh.num_elements), 4)

    boundary = np.concatenate([mesh.boundary,
                               mesh.edge_elements[:, 1] < 0])
    refined = _build_mesh(nodes, elements, h=mesh.h / 2, boundary=boundary)
    return refined, parents


def refine_uniform(mesh, levels):
    """Uniformly refine ``levels`` times and return the nesting hierarchy."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    fine = mesh
    fine_to_coarse = np.arange(mesh.num_elements)
    for _ in range(levels):
        fine, parents = _refine_once(fine)
        fine_to_coarse = fine_to_coarse[parents]
    return Hierarchy(
        coarse=mesh,
        fine=fine,
        fine_to_coarse=_freeze(fine_to_coarse),
        coarse_node_to_fine=_freeze(np.arange(mesh.num_nodes)),
        levels=levels,
    )


def edge_smoothing_domains(mesh):
    """Edge-based smoothing domains.

    An interior edge collects one barycentric third of each adjacent
    element, |s| = (|e1| + |e2|) / 3; a boundary edge keeps the single
    third, |s| = |e1| / 3.  The domains tile the mesh.
    """
    domains = []
    for k in range(mesh.num_edges):
        e1, e2 = mesh.edge_elements[k]
        if e2 >= 0:
            els = (int(e1), int(e2))
            area = (mesh.areas[e1] + mesh.areas[e2]) / 3.0
        else:
            els = (int(e1),)
            area = mesh.areas[e1] / 3.0
        domains.append(EdgeDomain(
            edge=k,
            nodes=(int(mesh.edges[k, 0]), int(mesh.edges[k, 1])),
            elements=els,
            area=float(area),
        ))
    return domains


def save_mesh(mesh, path):
    """Write the plain-text mesh format.

    Header ``nodes <count> elements <count>``, one ``x y flag`` line per
    node, one ``i j k`` line per element (0-based indices).
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.num_nodes} elements {mesh.num_elements}\n")
        for (x, y), flag in zip(mesh.nodes, mesh.boundary):
            fh.write(f"{x:.17g} {y:.17g} {int(flag)}\n")
        for i, j, k in mesh.elements:
            fh.write(f"{i} {j} {k}\n")


def load_mesh(path):
    """Read the plain-text mesh format written by :func:`save_mesh`.

    The characteristic size is reconstructed as sqrt(2 * total_area / ne),
    which reproduces L/n exactly for the structured family.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "nodes" or header[2] != "elements":
            raise ValueError(f"bad mesh header in {path}")
        nn, ne = int(header[1]), int(header[3])
        nodes = np.empty((nn, 2))
        boundary = np.empty(nn, dtype=bool)
        for p in range(nn):
            x, y, flag = fh.readline().split()
            nodes[p] = (float(x), float(y))
            boundary[p] = bool(int(flag))
        elements = np.empty((ne, 3), dtype=np.int64)
        for e in range(ne):
            elements[e] = [int(t) for t in fh.readline().split()]
    total = float(np.sum(_signed_areas(nodes, elements)))
    h = float(np.sqrt(2.0 * total / ne))
    return _build_mesh(nodes, elements, h=h, boundary=boundary)
