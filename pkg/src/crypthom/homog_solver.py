"""Constant-coefficient homogenized system.

Matrix names follow the usual Galerkin notation: ``M`` mass, ``Gm`` the
stiffness weighted by the averaged tensor ``Am``, ``GmD = D Gm``, ``D(p)`` the
convection matrix ``D_kl = sum_s p_s int grad phi_l . Am grad phi_s phi_k`` and
``Mr(C)`` the reaction matrix ``int (beta_m - gamma_m)(1 - C) phi_k phi_l``.
A time step solves

    (M + dt (-D(p^n) + GmD - Mr(C^n))) C^{n+1} = M C^n

and the pressure follows from ``Gm p = (beta_m - gamma_m) M C + gamma_vec``.
Dirichlet nodes are eliminated; with ``dirichlet=False`` the operators are
assembled over all nodes (useful for checking partition-of-unity identities).
"""
import time
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .cell_problem import HomCoeffs
from .linalg import Assembler, Factorization, _check, solve
from .mesh import QuadMesh, gauss_rule, quad_mesh_rect
from .sim import SimConfig, Trajectory, initial_density


class SeparableSolver:
    """Fast solver for ``alpha M + beta G`` on the interior of the uniform grid.

    With a diagonal tensor the Q1 matrices are Kronecker products of 1-D
    tridiagonal Toeplitz matrices, ``M = My x Mx`` and
    ``G = Am11 My x Kx + Am22 Ky x Mx``. Sine vectors diagonalize all of them,
    so a solve is two orthonormal DST-I transforms and a pointwise division.
    """

    def __init__(self, mesh, Am, alpha, beta):
        n = mesh.n - 1
        h = mesh.h
        c = np.cos(np.pi * np.arange(1, n + 1) / mesh.n)
        mu = h / 6 * (4 + 2 * c)        # eigenvalues of the 1-D mass matrix
        kappa = (2 - 2 * c) / h         # ... and of the 1-D stiffness matrix
        self.n = n
        # axis 0 is the second coordinate (row j of the interior grid)
        self.denom = (alpha * mu[:, None] * mu[None, :]
                      + beta * (Am[0, 0] * mu[:, None] * kappa[None, :]
                                + Am[1, 1] * kappa[:, None] * mu[None, :]))

    @staticmethod
    def applicable(Am, tol=1e-13):
        return abs(Am[0, 1]) <= tol * max(abs(Am[0, 0]), abs(Am[1, 1]))

    def solve(self, b):
        B = np.asarray(b, dtype=float).reshape(self.n, self.n)
        Bh = scipy.fft.dstn(B, type=1, norm="ortho")
        return scipy.fft.dstn(Bh / self.denom, type=1, norm="ortho").ravel()

    def operator(self):
        N = self.n * self.n
        return spla.LinearOperator((N, N), matvec=self.solve)


class _RefinedSolve:
    """Solve ``A x = b`` with an approximate inverse plus defect correction."""

    def __init__(self, A, approx, tol):
        self.A, self.approx, self.tol = A, approx, tol

    def solve(self, b):
        if not np.any(b):
            return np.zeros_like(b)
        x = self.approx(b)
        target = 0.01 * self.tol * np.linalg.norm(b)
        prev = np.inf
        for _ in range(5):
            r = b - self.A @ x
            res = np.linalg.norm(r)
            # stop at the target or once roundoff (about eps * cond * |b|) stalls progress
            if res <= target or res > 0.5 * prev:
                break
            prev = res
            x = x + self.approx(r)
        _check(self.A, x, b, self.tol, "separable solve")
        return x


@dataclass
class StaticOperators:
    mesh: QuadMesh
    hc: HomCoeffs
    M: sp.csr_matrix
    Gm: sp.csr_matrix
    GmD: sp.csr_matrix
    gamma_vec: np.ndarray
    assembler: Assembler
    conn: np.ndarray
    dofs: np.ndarray            # node ids carrying an unknown
    N: np.ndarray
    dN: np.ndarray
    W: np.ndarray
    conv_map: sp.csr_matrix = None     # data of D(p) = conv_map @ p
    reac_map: sp.csr_matrix = None     # data of Mr(C) = reac_map @ (1 - C)
    _pressure_lu: object = None
    _precond: dict = None

    @property
    def n_dofs(self):
        return len(self.dofs)

    def full(self, u):
        out = np.zeros(self.mesh.n_nodes)
        out[self.dofs] = u
        return out

    def restrict(self, u):
        return np.asarray(u, dtype=float)[self.dofs]

    def elements(self, **terms):
        return kernels.element_matrices(self.dN, self.W, self.N, self.mesh.n_elements, **terms)

    @property
    def separable(self):
        return self.n_dofs == len(self.mesh.interior) and SeparableSolver.applicable(self.hc.Am)

    def pressure_lu(self, tol):
        """Solver for ``Gm``: fast diagonalization when possible, else sparse LU."""
        if self._pressure_lu is None:
            if self.separable:
                fd = SeparableSolver(self.mesh, self.hc.Am, 0.0, 1.0)
                self._pressure_lu = _RefinedSolve(self.Gm, fd.solve, tol)
            else:
                self._pressure_lu = Factorization(self.Gm, tol)
        return self._pressure_lu

    def preconditioner(self, dt, tol):
        """Approximate inverse of ``M + dt GmD``, the part of the step matrix fixed in time."""
        self._precond = self._precond or {}
        if dt not in self._precond:
            if self.separable:
                fd = SeparableSolver(self.mesh, self.hc.Am, 1.0, dt * self.hc.D)
                self._precond[dt] = fd.operator()
            else:
                self._precond[dt] = Factorization(self.M + dt * self.GmD, tol)
        return self._precond[dt]


def _packed(Am):
    return np.array([Am[0, 0], Am[0, 1], Am[1, 1]])


def assemble_static(hc: HomCoeffs, mesh: QuadMesh, dirichlet=True):
    rule = gauss_rule(2)
    N, dN, W = mesh.reference_data(rule)
    ne, nq = mesh.n_elements, len(rule.weights)
    if dirichlet:
        num, dofs = mesh.interior_numbering(), mesh.interior
    else:
        num, dofs = np.arange(mesh.n_nodes), np.arange(mesh.n_nodes)
    conn = num[mesh.elements]
    asm = Assembler(conn, len(dofs))

    # every element is a translate of the same square: compute once, broadcast
    one = lambda **kw: kernels.element_matrices(dN, W, N, 1, **kw)[0]
    Me = one(d=np.ones((1, nq)))
    Ge = one(K=np.tile(_packed(hc.Am), (1, nq, 1)))
    tile = lambda E: np.broadcast_to(E, (ne, 4, 4))
    M = asm.assemble(tile(Me))
    Gm = asm.assemble(tile(Ge))
    GmD = asm.assemble(tile(hc.D * Ge))
    fe = np.broadcast_to(hc.gamma_m * (W @ N), (ne, 4))
    gamma_vec = asm.assemble_vector(fe, conn)

    # trilinear forms of one element: the matrices D(p), Mr(C) are linear in
    # the nodal vectors, so their CSR data is a fixed sparse map applied to them
    w = W[0]
    dn = dN[0]
    conv = np.einsum("q,qld,de,qse,qk->kls", w, dn, hc.Am, dn, N)
    reac = (hc.beta_m - hc.gamma_m) * np.einsum("q,qk,ql,qs->kls", w, N, N, N)
    return StaticOperators(mesh=mesh, hc=hc, M=M, Gm=Gm, GmD=GmD, gamma_vec=gamma_vec,
                           assembler=asm, conn=conn, dofs=dofs, N=N, dN=dN, W=W,
                           conv_map=asm.linear_map(mesh.elements, conv, mesh.n_nodes),
                           reac_map=asm.linear_map(mesh.elements, reac, mesh.n_nodes))


def solve_homog_pressure(C, ops: StaticOperators, tol=1e-10, source=None):
    """Nodal pressure for nodal density ``C`` (or for a prescribed ``source(X1, X2)``)."""
    hc = ops.hc
    if source is None:
        rhs = (hc.beta_m - hc.gamma_m) * (ops.M @ ops.restrict(C)) + ops.gamma_vec
    else:
        Xq = ops.mesh.quadrature_points(gauss_rule(2))
        local = (ops.W * source(Xq[..., 0], Xq[..., 1])) @ ops.N
        rhs = ops.assembler.assemble_vector(local, ops.conn)
    return ops.full(ops.pressure_lu(tol).solve(rhs))


def _grad_at_q(ops, u):
    return np.einsum("ek,qkd->eqd", np.asarray(u)[ops.mesh.elements], ops.dN[0])


def assemble_convection(p, ops: StaticOperators):
    """``D(p)`` for nodal pressure ``p``: trial gradient against ``Am grad p``."""
    return ops.assembler.matrix(ops.conv_map @ np.asarray(p, dtype=float))


def assemble_reaction(C, ops: StaticOperators):
    """``Mr(C)`` for nodal density ``C``, integrated with the same 2x2 rule."""
    return ops.assembler.matrix(ops.reac_map @ (1.0 - np.asarray(C, dtype=float)))


def assemble_convection_elementwise(p, ops: StaticOperators):
    """Same matrix as :func:`assemble_convection`, through the element kernel."""
    flux = _grad_at_q(ops, p) @ ops.hc.Am.T
    return ops.assembler.assemble(ops.elements(b=flux))


def assemble_reaction_elementwise(C, ops: StaticOperators):
    hc = ops.hc
    Cq = np.asarray(C)[ops.mesh.elements] @ ops.N.T
    return ops.assembler.assemble(ops.elements(d=(hc.beta_m - hc.gamma_m) * (1.0 - Cq)))


def step_matrix(C, p, ops, dt):
    # all operators share the assembler's CSR pattern, so combine the data arrays
    data = ops.M.data + dt * (ops.GmD.data - ops.conv_map @ np.asarray(p, dtype=float)
                              - ops.reac_map @ (1.0 - np.asarray(C, dtype=float)))
    return ops.assembler.matrix(data)


def step_homog_density(C, p, ops: StaticOperators, cfg: SimConfig, method="direct"):
    """One backward-Euler step. ``method="iterative"`` runs GMRES preconditioned by
    a cached solver for ``M + dt GmD``."""
    S = step_matrix(C, p, ops, cfg.dt)
    rhs = ops.M @ ops.restrict(C)
    if method == "iterative":
        x = solve(S, rhs, tol=cfg.tol, method="iterative",
                  preconditioner=ops.preconditioner(cfg.dt, cfg.tol))
    else:
        x = solve(S, rhs, tol=cfg.tol, method=method)
    return ops.full(x)


def run_homog(hc: HomCoeffs, cfg: SimConfig, C0=None, ops=None, scheme="lagged",
              method="iterative", record_all=False):
    """Time loop of the homogenized model.

    ``scheme="lagged"``: pressure from the initial density, then per step
    convection from ``p^n`` -> density -> pressure from ``C^{n+1}``.
    ``scheme="pressure_first"`` reorders the step so that the pressure at
    ``t_{n+1}`` is computed before the final density solve: a predictor
    density gives ``p*``, and the convection matrix is built from ``p*``.
    Simply moving the pressure solve to the top of the loop would reproduce
    the lagged order exactly, since ``p^n`` is already a function of ``C^n``.
    """
    if scheme not in ("lagged", "pressure_first"):
        raise ValueError(f"unknown scheme {scheme!r}")
    t0 = time.perf_counter()
    mesh = ops.mesh if ops is not None else quad_mesh_rect(cfg.h)
    ops = ops or assemble_static(hc, mesh)
    if method == "iterative":
        ops.preconditioner(cfg.dt, cfg.tol)
    C = initial_density(mesh.nodes) if C0 is None else np.asarray(C0, dtype=float).copy()
    C[mesh.boundary] = 0.0
    p = solve_homog_pressure(C, ops, cfg.tol)
    traj = Trajectory(mesh=mesh, meta={"solver": "homog", "scheme": scheme,
                                        "setup_seconds": time.perf_counter() - t0,
                                        "step_seconds": []})
    traj.append(0.0, C, p)
    outputs = cfg.output_steps
    for n in range(1, cfg.n_steps + 1):
        ts = time.perf_counter()
        if scheme == "pressure_first":
            C_pred = step_homog_density(C, p, ops, cfg, method=method)
            p = solve_homog_pressure(C_pred, ops, cfg.tol)
        C = step_homog_density(C, p, ops, cfg, method=method)
        p = solve_homog_pressure(C, ops, cfg.tol)
        traj.meta["step_seconds"].append(time.perf_counter() - ts)
        if n in outputs:
            traj.append(outputs[n], C, p)
        elif record_all:
            traj.append(n * cfg.dt, C, p)
    return traj
