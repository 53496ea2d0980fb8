"""Invariant density on the periodic hexagon and the averaged coefficients.

The density ``m`` spans the kernel of the adjoint of ``u -> -A : grad^2 u``
on periodic functions. It is discretised with periodic P1 elements through a
single integration by parts,

    int_P (A grad m + m div A) . grad phi dY = 0   for all periodic phi,

where ``div A`` is the in-region divergence (zero in the collar and the bottom
disc, closed form in the annulus). Jumps of ``A`` across the two circles are
not represented; the circles are not resolved by the mesh either, so the
coefficients are simply sampled at quadrature points.
"""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, ParameterError, PositivityError
from .geometry import CoefficientField
from .linalg import Assembler, solve_constrained_nullspace
from .mesh import DofMap, TriMesh, periodic_dof_map, triangle_rule, triangulate_hexagon


@dataclass
class DensityField:
    values: np.ndarray  # one entry per periodic dof
    mesh: TriMesh
    dofs: DofMap

    @property
    def nodal(self):
        return self.dofs.expand(self.values)

    def integral(self, rule=None):
        rule = rule or triangle_rule(3)
        N = self.mesh.shape_values(rule)
        mq = N @ self.nodal[self.mesh.tris].T  # (nq, nt)
        return float(np.einsum("q,qe,e->", rule.weights, mq, 2 * self.mesh.areas))


@dataclass(frozen=True)
class HomCoeffs:
    """Averages of ``A m``, ``beta m`` and ``gamma m`` over the cell, plus ``D``."""

    Am: np.ndarray
    beta_m: float
    gamma_m: float
    D: float

    KEYS = ("Am11", "Am12", "Am22", "beta_m", "gamma_m", "D")

    def __post_init__(self):
        Am = np.asarray(self.Am, dtype=float)
        if Am.shape != (2, 2):
            raise ParameterError("Am must be 2x2")
        object.__setattr__(self, "Am", Am)

    @classmethod
    def identity(cls, beta_m=0.0, gamma_m=0.0, D=1.0):
        return cls(np.eye(2), beta_m, gamma_m, D)

    def validate(self, tol=1e-12):
        Am = self.Am
        problems = []
        if abs(Am[0, 1] - Am[1, 0]) > tol * np.abs(Am).max():
            problems.append("Am is not symmetric")
        if np.linalg.eigvalsh(0.5 * (Am + Am.T)).min() <= 0:
            problems.append("Am is not positive definite")
        if not self.beta_m >= self.gamma_m >= 0:
            problems.append("need beta_m >= gamma_m >= 0")
        if not self.D > 0:
            problems.append("D must be positive")
        if problems:
            raise ParameterError("; ".join(problems))
        return self

    def as_dict(self):
        return {"Am11": float(self.Am[0, 0]), "Am12": float(self.Am[0, 1]),
                "Am22": float(self.Am[1, 1]), "beta_m": float(self.beta_m),
                "gamma_m": float(self.gamma_m), "D": float(self.D)}

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" for k, v in self.as_dict().items())

    @classmethod
    def from_text(cls, text):
        vals = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {raw!r}", line=lineno)
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in cls.KEYS:
                raise ConfigError(f"unknown key {k!r}", line=lineno)
            try:
                vals[k] = float(v)
            except ValueError:
                raise ConfigError(f"value of {k} is not a number: {v!r}", line=lineno) from None
        missing = [k for k in cls.KEYS if k not in vals]
        if missing:
            raise ConfigError(f"missing keys: {', '.join(missing)}")
        Am = np.array([[vals["Am11"], vals["Am12"]], [vals["Am12"], vals["Am22"]]])
        return cls(Am, vals["beta_m"], vals["gamma_m"], vals["D"])

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def _tri_reference(mesh, rule):
    nq = len(rule.weights)
    N = mesh.shape_values(rule)
    grads = mesh.gradients()
    dN = np.ascontiguousarray(np.repeat(grads[:, None], nq, axis=1))
    W = np.outer(2 * mesh.areas, rule.weights)
    return N, dN, W


def assemble_adjoint_operator(mesh, dofs, coeffs=CoefficientField(), rule=None):
    """Periodic stiffness matrix of ``m -> -d_i d_j (A_ij m)``."""
    rule = rule or triangle_rule(3)
    N, dN, W = _tri_reference(mesh, rule)
    Yq = mesh.quadrature_points(rule)
    s = coeffs.sample(Yq.reshape(-1, 2))
    nt, nq = Yq.shape[:2]
    vals = kernels.element_matrices(dN, W, N, nt, K=s.A.reshape(nt, nq, 3),
                                    c=s.divA.reshape(nt, nq, 2))
    conn = dofs.dof_of_node[mesh.tris]
    return Assembler(conn, dofs.n_dofs).assemble(vals)


def integral_weights(mesh, dofs, rule=None):
    """Vector ``c`` with ``c @ u = int_P u`` for periodic P1 fields ``u``."""
    rule = rule or triangle_rule(3)
    N = mesh.shape_values(rule)
    W = np.outer(2 * mesh.areas, rule.weights)
    local = W @ N  # (nt, 3)
    conn = dofs.dof_of_node[mesh.tris]
    return np.bincount(conn.ravel(), weights=local.ravel(), minlength=dofs.n_dofs)


def solve_density(K, mesh, dofs, method="bordered", rule=None):
    """Normalised, strictly positive kernel vector of ``K``."""
    c = integral_weights(mesh, dofs, rule)
    m = solve_constrained_nullspace(K, c, method=method)
    m = m / (c @ m)
    i = int(np.argmin(m))
    if not m[i] > 0:
        node = int(dofs.node_of_dof[i])
        raise PositivityError(f"density positivity violated: min m = {m[i]:.3e} at node {node} "
                              f"{tuple(mesh.nodes[node])}", min_value=float(m[i]), node=node)
    return DensityField(values=m, mesh=mesh, dofs=dofs)


def homogenized_coefficients(m, coeffs=CoefficientField(), rule=None):
    rule = rule or triangle_rule(3)
    mesh = m.mesh
    N = mesh.shape_values(rule)
    Yq = mesh.quadrature_points(rule).reshape(-1, 2)
    mq = (m.nodal[mesh.tris] @ N.T).ravel()  # (nt*nq,)
    wq = np.outer(2 * mesh.areas, rule.weights).ravel() * mq
    s = coeffs.sample(Yq)
    A = wq @ s.A
    Am = np.array([[A[0], A[1]], [A[1], A[2]]])
    return HomCoeffs(Am=Am, beta_m=float(wq @ s.beta), gamma_m=float(wq @ s.gamma), D=coeffs.D)


def solve_cell_problem(n_ref=32, coeffs=CoefficientField(), method="bordered"):
    """Mesh, assemble and solve; returns ``(density, homogenized coefficients)``."""
    mesh = triangulate_hexagon(n_ref, coeffs.geometry)
    dofs = periodic_dof_map(mesh)
    K = assemble_adjoint_operator(mesh, dofs, coeffs)
    m = solve_density(K, mesh, dofs, method=method)
    return m, homogenized_coefficients(m, coeffs)


def rotation_matrix(angle=math.pi / 3):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])
