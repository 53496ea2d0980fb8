"""Meshes and quadrature.

Two meshes are needed: a periodic P1 triangulation of the reference hexagon
(for the cell problem) and a structured bilinear quadrilateral grid of
``[-1, 1]^2`` (for both evolution problems).

The hexagon triangulation is the equilateral lattice of spacing ``a / n_ref``
clipped to the hexagon, which is the same as cutting the hexagon into its six
equilateral sectors and refining each uniformly. Opposite edges therefore carry
identical node sequences up to a lattice translation, and the mesh is
invariant under rotation by 60 degrees.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import MeshError, ParameterError
from .geometry import DEFAULT_GEOMETRY, SQRT3


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, 2) on the reference element
    weights: np.ndarray  # (nq,), sum equals the reference area


def triangle_rule(npts=3):
    """Rule on the unit reference triangle (0,0), (1,0), (0,1).

    ``npts=3`` is the interior Gauss rule (exact for degree 2), ``npts=7``
    the degree-5 Dunavant rule.
    """
    if npts == 3:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif npts == 7:
        a1, b1 = 0.059715871789770, 0.470142064105115
        a2, b2 = 0.797426985353087, 0.101286507323456
        bary = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
            [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
        ])
        w = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)
    else:
        raise ParameterError(f"no {npts}-point triangle rule")
    return QuadratureRule(points=bary[:, 1:].copy(), weights=0.5 * w)


def gauss_rule(n=2):
    """Tensor Gauss-Legendre rule with ``n x n`` points on ``[-1, 1]^2``."""
    x, w = np.polynomial.legendre.leggauss(n)
    X, Y = np.meshgrid(x, x, indexing="xy")
    return QuadratureRule(points=np.stack([X.ravel(), Y.ravel()], axis=1),
                          weights=np.outer(w, w).ravel())


# ---------------------------------------------------------------------------
# periodic hexagon triangulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriMesh:
    nodes: np.ndarray          # (nn, 2)
    tris: np.ndarray           # (nt, 3), counter-clockwise
    boundary_edges: np.ndarray  # (nb, 2)
    n_ref: int
    a: float

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_tris(self):
        return len(self.tris)

    @property
    def areas(self):
        p = self.nodes[self.tris]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def gradients(self):
        """Constant P1 gradients, shape (nt, 3, 2)."""
        p = self.nodes[self.tris]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
        Jinv = np.linalg.inv(J)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.einsum("kr,erd->ekd", ref, Jinv)

    def shape_values(self, rule):
        xi, eta = rule.points[:, 0], rule.points[:, 1]
        return np.stack([1 - xi - eta, xi, eta], axis=1)

    def quadrature_points(self, rule):
        N = self.shape_values(rule)
        return np.einsum("qk,ekd->eqd", N, self.nodes[self.tris])

    def boundary_nodes(self):
        return np.unique(self.boundary_edges)


def triangulate_hexagon(n_ref, geometry=DEFAULT_GEOMETRY):
    """Uniform periodic triangulation of the reference hexagon.

    ``n_ref`` subdivisions per hexagon edge give ``6 n_ref^2`` triangles and
    ``3 n_ref^2 + 3 n_ref + 1`` nodes.
    """
    n = int(n_ref)
    if n != n_ref or n < 1:
        raise ParameterError(f"n_ref must be a positive integer, got {n_ref}")
    a = geometry.a
    # lattice coordinates (i, j) on e1 = (1, 0) a/n, e2 = (1/2, sqrt3/2) a/n
    ij = [(i, j) for j in range(-n, n + 1) for i in range(-n, n + 1) if abs(i + j) <= n]
    index = {p: k for k, p in enumerate(ij)}
    ij = np.array(ij)
    h = a / n
    nodes = np.stack([h * (ij[:, 0] + 0.5 * ij[:, 1]), h * 0.5 * SQRT3 * ij[:, 1]], axis=1)

    tris = []
    for i, j in ((i, j) for j in range(-n - 1, n + 1) for i in range(-n - 1, n + 1)):
        up = ((i, j), (i + 1, j), (i, j + 1))
        down = ((i + 1, j), (i + 1, j + 1), (i, j + 1))
        for t in (up, down):
            if all(v in index for v in t):
                tris.append([index[v] for v in t])
    tris = np.array(tris, dtype=np.int64)

    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return TriMesh(nodes=nodes, tris=tris, boundary_edges=uniq[counts == 1], n_ref=n, a=a)


@dataclass(frozen=True)
class DofMap:
    """Periodic identification of hexagon boundary nodes."""

    dof_of_node: np.ndarray   # (nn,)
    node_of_dof: np.ndarray   # (ndof,) representative node
    pairs: np.ndarray         # (np, 2) identified node pairs

    @property
    def n_dofs(self):
        return len(self.node_of_dof)

    def expand(self, u):
        return np.asarray(u)[self.dof_of_node]

    def restrict(self, u):
        return np.asarray(u)[self.node_of_dof]


def lattice_translations(a):
    b1 = np.array([1.5 * a, 0.5 * SQRT3 * a])
    b2 = np.array([0.0, SQRT3 * a])
    t = np.array([b1, b2, b1 - b2])
    return np.concatenate([t, -t])


def periodic_dof_map(mesh, tol=1e-9):
    """Identify boundary nodes that differ by a lattice translation."""
    bnodes = mesh.boundary_nodes()
    tree = cKDTree(mesh.nodes[bnodes])
    parent = np.arange(mesh.n_nodes)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = []
    scale = tol * mesh.a
    for t in lattice_translations(mesh.a):
        dist, hit = tree.query(mesh.nodes[bnodes] + t, distance_upper_bound=scale)
        for k, (d, j) in enumerate(zip(dist, hit)):
            if np.isfinite(d):
                u, v = bnodes[k], bnodes[j]
                if u < v:
                    pairs.append((u, v))
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[max(ru, rv)] = min(ru, rv)
    roots = np.array([find(i) for i in range(mesh.n_nodes)])
    matched = np.zeros(mesh.n_nodes, dtype=bool)
    if pairs:
        matched[np.array(pairs).ravel()] = True
    unmatched = [b for b in bnodes if not matched[b]]
    if unmatched:
        raise MeshError(f"{len(unmatched)} boundary nodes have no periodic partner, "
                        f"e.g. node {unmatched[0]} at {mesh.nodes[unmatched[0]]}")
    node_of_dof, dof_of_node = np.unique(roots, return_inverse=True)
    return DofMap(dof_of_node=dof_of_node, node_of_dof=node_of_dof,
                  pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2))


# ---------------------------------------------------------------------------
# structured bilinear mesh of [-1, 1]^2
# ---------------------------------------------------------------------------

_LOCAL = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def bilinear_shape(points):
    """Values (nq, 4) and reference gradients (nq, 4, 2) of Q1 shape functions."""
    xi, eta = points[:, :1], points[:, 1:]
    N = 0.25 * (1 + xi * _LOCAL[:, 0]) * (1 + eta * _LOCAL[:, 1])
    dxi = 0.25 * _LOCAL[:, 0] * (1 + eta * _LOCAL[:, 1])
    deta = 0.25 * _LOCAL[:, 1] * (1 + xi * _LOCAL[:, 0])
    return N, np.stack([dxi, deta], axis=2)


@dataclass(frozen=True)
class QuadMesh:
    h: float
    n: int                     # elements per side
    nodes: np.ndarray          # (nn, 2), node id = j (n+1) + i
    elements: np.ndarray       # (ne, 4), counter-clockwise
    boundary: np.ndarray       # (nn,) bool
    interior: np.ndarray = field(repr=False)  # node ids of interior nodes

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def reference_data(self, rule):
        """``(N, dN, W)`` for the kernels: dN (1, nq, 4, 2), W (1, nq)."""
        N, dref = bilinear_shape(rule.points)
        dN = dref * (2.0 / self.h)
        W = rule.weights * (self.h / 2) ** 2
        return N, dN[None], W[None]

    def quadrature_points(self, rule):
        N, _ = bilinear_shape(rule.points)
        return np.einsum("qk,ekd->eqd", N, self.nodes[self.elements])

    def interior_numbering(self):
        """Map node id -> interior dof index, -1 on the boundary."""
        num = -np.ones(self.n_nodes, dtype=np.int64)
        num[self.interior] = np.arange(len(self.interior))
        return num


def quad_mesh_rect(h):
    """Uniform ``(2/h)^2`` bilinear grid of ``[-1, 1]^2``."""
    if not h > 0:
        raise ParameterError("spacing h must be positive")
    n = int(round(2.0 / h))
    if n < 1 or abs(n * h - 2.0) > 1e-9:
        raise ParameterError(f"2/h must be an integer, got 2/h = {2.0 / h}")
    h = 2.0 / n
    x = np.linspace(-1.0, 1.0, n + 1)
    XX, YY = np.meshgrid(x, x, indexing="xy")
    nodes = np.stack([XX.ravel(), YY.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    base = (j * (n + 1) + i).ravel()
    elements = np.stack([base, base + 1, base + n + 2, base + n + 1], axis=1)
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    boundary = ((ii == 0) | (ii == n) | (jj == 0) | (jj == n)).ravel()
    return QuadMesh(h=h, n=n, nodes=nodes, elements=elements, boundary=boundary,
                    interior=np.flatnonzero(~boundary))
