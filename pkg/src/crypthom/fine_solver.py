"""Heterogeneous periodic model on ``[-1, 1]^2``.

Bilinear elements, 2x2 Gauss quadrature, backward Euler in time. The density
equation and the pressure equation are in non-divergence form
``A_ij d_i (.)``; both are integrated by parts once, so for a flux ``w``

    - int A_ij d_i w_j v  =  int w . (A grad v) + int (div A . w) v,

with ``div A`` the region-wise analytic derivative (carrying the factor
``1/eps`` of the fast variable). Coefficients are sampled pointwise at the
quadrature points after folding them into the reference hexagon.

Per step the pressure is lagged: ``C^{n+1}`` uses the convection field of
``p^n``, then ``p^{n+1}`` is solved from ``C^{n+1}``.
"""
import logging
import time

import numpy as np

from . import kernels
from .errors import ConfigError
from .geometry import CoefficientField
from .linalg import Assembler, Factorization, solve
from .mesh import gauss_rule, quad_mesh_rect
from .sim import SimConfig, Trajectory, initial_density

log = logging.getLogger(__name__)


class FineProblem:
    """Mesh, sampled coefficients and the matrices that do not change in time."""

    def __init__(self, cfg: SimConfig, coeffs: CoefficientField = CoefficientField(),
                 check_resolution=True):
        if cfg.eps is None:
            raise ConfigError("the heterogeneous solver needs eps")
        if check_resolution:
            cfg.check_resolution(coeffs.geometry.a)
        self.cfg = cfg
        self.coeffs = coeffs
        self.mesh = mesh = quad_mesh_rect(cfg.h)
        self.rule = gauss_rule(2)
        self.N, self.dN, self.W = mesh.reference_data(self.rule)
        ne, nq = mesh.n_elements, len(self.rule.weights)
        self.Xq = mesh.quadrature_points(self.rule)
        s = coeffs.sample_periodic(self.Xq.reshape(-1, 2), cfg.eps, cfg.offset)
        self.A = s.A.reshape(ne, nq, 3)
        self.divA = s.divA.reshape(ne, nq, 2)
        self.gamma = s.gamma.reshape(ne, nq)
        self.beta = s.beta.reshape(ne, nq)

        self.num = mesh.interior_numbering()
        self.conn = self.num[mesh.elements]
        self.n_dofs = len(mesh.interior)
        self.assembler = Assembler(self.conn, self.n_dofs)

        em = self._elements
        self.M = self.assembler.assemble(em(d=np.ones((ne, nq))))
        self.K = self.assembler.assemble(em(K=self.A, b=self.divA))
        self.M_beta = self.assembler.assemble(em(d=self.beta))
        self.M_source = self.assembler.assemble(em(d=self.beta - self.gamma))
        self.gamma_vec = self.load_vector(self.gamma)
        self.pressure_lu = Factorization(self.K, cfg.tol)
        self.static = (self.M + cfg.dt * (coeffs.D * self.K - self.M_beta)).tocsr()
        self._static_lu = None

    def _elements(self, **terms):
        return kernels.element_matrices(self.dN, self.W, self.N, self.mesh.n_elements, **terms)

    def load_vector(self, f_q):
        """``int f v`` for quadrature values ``f_q`` (ne, nq), interior dofs only."""
        local = (self.W * f_q) @ self.N
        return self.assembler.assemble_vector(local, self.conn)

    def full(self, u_int):
        u = np.zeros(self.mesh.n_nodes)
        u[self.mesh.interior] = u_int
        return u

    def interior(self, u):
        return np.asarray(u, dtype=float)[self.mesh.interior]

    def pressure_rhs(self, C_int):
        return self.M_source @ C_int + self.gamma_vec

    def solve_pressure(self, C, source=None):
        """Pressure for nodal density ``C``; ``source(X1, X2)`` replaces the right-hand side."""
        if source is None:
            rhs = self.pressure_rhs(self.interior(C))
        else:
            rhs = self.load_vector(source(self.Xq[..., 0], self.Xq[..., 1]))
        return self.full(self.pressure_lu.solve(rhs))

    def convection(self, p):
        gp = np.einsum("ek,qkd->eqd", np.asarray(p)[self.mesh.elements], self.dN[0])
        A = self.A
        flux = np.stack([A[..., 0] * gp[..., 0] + A[..., 1] * gp[..., 1],
                         A[..., 1] * gp[..., 0] + A[..., 2] * gp[..., 1]], axis=-1)
        react = self.divA[..., 0] * gp[..., 0] + self.divA[..., 1] * gp[..., 1]
        return self.assembler.assemble(self._elements(c=flux, d=react))

    def step_matrix(self, p):
        return (self.static + self.cfg.dt * self.convection(p)).tocsr()

    def static_lu(self):
        """Cached LU of the time-independent part of the step matrix."""
        if self._static_lu is None:
            self._static_lu = Factorization(self.static, self.cfg.tol)
        return self._static_lu

    def step_density(self, C, p, method="iterative"):
        """Backward-Euler step with convection frozen at ``p``.

        ``"iterative"`` runs GMRES preconditioned by :meth:`static_lu`;
        ``"direct"`` factorizes the full step matrix.
        """
        rhs = self.M @ self.interior(C)
        S = self.step_matrix(p)
        pre = self.static_lu() if method == "iterative" else None
        return self.full(solve(S, rhs, tol=self.cfg.tol, method=method, preconditioner=pre))

    def cell_count(self):
        """Number of (possibly clipped) periodicity cells covering the domain.

        Returns ``(fractional, touched)``: the covered area in cell units and
        the number of distinct lattice cells containing a quadrature point.
        """
        a = self.coeffs.geometry.a
        _, idx = kernels.wrap_points(self.Xq.reshape(-1, 2), self.cfg.eps, a, self.cfg.offset)
        area_cell = self.coeffs.geometry.area * self.cfg.eps ** 2
        return float(np.sum(self.W) * self.mesh.n_elements) / area_cell, len(np.unique(idx, axis=0))


def solve_fine_pressure(C, cfg, coeffs=CoefficientField(), source=None, problem=None):
    problem = problem or FineProblem(cfg, coeffs)
    return problem.solve_pressure(C, source=source)


def step_fine_density(C, p, cfg, coeffs=CoefficientField(), problem=None, method="iterative"):
    problem = problem or FineProblem(cfg, coeffs)
    return problem.step_density(C, p, method=method)


def run_fine(cfg, coeffs=CoefficientField(), C0=None, problem=None, method="iterative",
             record_all=False):
    """Time loop of the heterogeneous model; returns the recorded trajectory.

    ``p`` at ``t = 0`` is the compatibility solve with the initial density.
    With ``record_all`` every step is kept, not only the output times.
    """
    t0 = time.perf_counter()
    problem = problem or FineProblem(cfg, coeffs)
    mesh = problem.mesh
    C = initial_density(mesh.nodes) if C0 is None else np.asarray(C0, dtype=float).copy()
    C[mesh.boundary] = 0.0
    if method == "iterative":
        problem.static_lu()
    p = problem.solve_pressure(C)
    traj = Trajectory(mesh=mesh, meta={"solver": "fine", "eps": cfg.eps,
                                        "setup_seconds": time.perf_counter() - t0,
                                        "step_seconds": []})
    traj.append(0.0, C, p)
    outputs = cfg.output_steps
    for n in range(1, cfg.n_steps + 1):
        ts = time.perf_counter()
        C = problem.step_density(C, p, method=method)
        p = problem.solve_pressure(C)
        traj.meta["step_seconds"].append(time.perf_counter() - ts)
        if n in outputs:
            traj.append(outputs[n], C, p)
        elif record_all:
            traj.append(n * cfg.dt, C, p)
        log.debug("fine step %d/%d", n, cfg.n_steps)
    return traj
