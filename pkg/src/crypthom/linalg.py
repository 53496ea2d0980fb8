"""Sparse assembly and residual-checked linear solves.

Matrices are scipy CSR matrices. Direct solves go through SuperLU; the
iterative path is restarted GMRES, optionally preconditioned by a cached
factorization of a nearby matrix.
"""
import logging

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


class Assembler:
    """Scatter element matrices into a fixed CSR pattern.

    The pattern is computed once from the connectivity; negative dof indices
    (eliminated Dirichlet nodes) are dropped. Each call to :meth:`assemble`
    accumulates with :func:`numpy.bincount`, so duplicate contributions are
    summed in a fixed order and the result does not depend on how element
    matrices were produced.
    """

    def __init__(self, conn, n_dofs):
        conn = np.asarray(conn, dtype=np.int64)
        nel, nl = conn.shape
        rows = np.repeat(conn, nl, axis=1).ravel()
        cols = np.tile(conn, (1, nl)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        self.keep = np.flatnonzero(keep)
        self.shape = (n_dofs, n_dofs)
        self.local_size = nl
        key = rows[keep] * n_dofs + cols[keep]
        uniq, self.slot = np.unique(key, return_inverse=True)
        self.indices = (uniq % n_dofs).astype(np.int32)
        row_of = uniq // n_dofs
        self.indptr = np.zeros(n_dofs + 1, dtype=np.int64)
        np.add.at(self.indptr, row_of + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.nnz = len(uniq)

    def assemble(self, element_matrices):
        vals = np.asarray(element_matrices).reshape(-1)[self.keep]
        return self.matrix(np.bincount(self.slot, weights=vals, minlength=self.nnz))

    def matrix(self, data):
        """CSR matrix on the fixed pattern with the given nonzero values."""
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)

    def linear_map(self, conn_nodes, tensor, n_nodes):
        """Sparse ``P`` with ``P @ u`` = assembled data of ``sum_s u_s tensor[:, :, s]``.

        ``tensor`` (nl, nl, nl) is one element's trilinear form, identical on every
        element; ``conn_nodes`` gives the node of each local index ``s``.
        """
        nel, nl = conn_nodes.shape
        flat = self.keep                      # kept positions in the (e, k, l) layout
        e, kl = np.divmod(flat, nl * nl)
        T = tensor.reshape(nl * nl, nl)
        rows = np.repeat(self.slot, nl)
        cols = conn_nodes[np.repeat(e, nl), np.tile(np.arange(nl), len(e))]
        vals = T[np.repeat(kl, nl), np.tile(np.arange(nl), len(e))]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.nnz, n_nodes))

    def assemble_vector(self, element_vectors, conn):
        conn = np.asarray(conn).ravel()
        vals = np.asarray(element_vectors).ravel()
        ok = conn >= 0
        return np.bincount(conn[ok], weights=vals[ok], minlength=self.shape[0])


def residual_norm(A, x, b):
    return float(np.linalg.norm(A @ x - b))


def _check(A, x, b, tol, what):
    if not np.all(np.isfinite(x)):
        raise SolverError(f"{what}: non-finite entries in solution")
    res = residual_norm(A, x, b)
    bnorm = float(np.linalg.norm(b))
    if res > tol * bnorm:
        raise SolverError(f"{what}: residual {res:.3e} exceeds {tol:.1e} * |b| = {tol * bnorm:.3e}",
                          residual=res)
    return res


class Factorization:
    """LU factorization with residual-checked solves and iterative refinement."""

    def __init__(self, A, tol=DEFAULT_TOL):
        self.A = sp.csc_matrix(A)
        self.tol = tol
        try:
            self.lu = spla.splu(self.A)
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    def solve(self, b, check=True):
        b = np.asarray(b, dtype=float)
        if not np.any(b):
            return np.zeros_like(b)
        x = self.lu.solve(b)
        for _ in range(2):
            r = b - self.A @ x
            if np.linalg.norm(r) <= 0.01 * self.tol * np.linalg.norm(b):
                break
            x = x + self.lu.solve(r)
        if check:
            _check(self.A, x, b, self.tol, "direct solve")
        return x

    def as_preconditioner(self):
        n = self.A.shape[0]
        return spla.LinearOperator((n, n), matvec=self.lu.solve)


def solve(A, b, tol=DEFAULT_TOL, maxiter=None, method="direct", preconditioner=None):
    """Solve ``A x = b`` and verify ``|A x - b| <= tol |b|``.

    ``method`` is ``"direct"`` (SuperLU) or ``"iterative"`` (GMRES, with
    ``preconditioner`` a :class:`Factorization` or LinearOperator, default
    incomplete LU). ``"auto"`` uses the direct path below 200k unknowns.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    if not np.any(b):
        return np.zeros_like(b)
    if method == "auto":
        method = "direct" if A.shape[0] <= 200_000 else "iterative"
    if method == "direct":
        return Factorization(A, tol).solve(b)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")

    if isinstance(preconditioner, Factorization):
        M = preconditioner.as_preconditioner()
    elif preconditioner is None:
        try:
            ilu = spla.spilu(sp.csc_matrix(A), drop_tol=1e-5, fill_factor=10)
        except RuntimeError as exc:
            raise SolverError(f"incomplete factorization failed: {exc}") from exc
        M = spla.LinearOperator(A.shape, matvec=ilu.solve)
    else:
        M = preconditioner
    maxiter = maxiter or 500
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(A, b, rtol=0.1 * tol, atol=0.0, restart=50, maxiter=maxiter, M=M,
                         callback=cb, callback_type="pr_norm")
    if info > 0:
        raise SolverError(f"GMRES did not converge in {count[0]} iterations", iterations=count[0],
                          residual=residual_norm(A, x, b))
    if info < 0:
        raise SolverError(f"GMRES breakdown (info={info})")
    _check(A, x, b, tol, "iterative solve")
    return x


def _normalize(m, c):
    s = float(c @ m)
    if s == 0 or not np.isfinite(s):
        raise SolverError("null vector is orthogonal to the constraint vector")
    return m / s


def _bordered(A, c):
    n = A.shape[0]
    c = np.asarray(c, dtype=float)
    K = sp.bmat([[A, sp.csr_matrix(c.reshape(-1, 1))], [sp.csr_matrix(c.reshape(1, -1)), None]],
                format="csc")
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    try:
        sol = spla.splu(K).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"bordered system is singular: {exc}") from exc
    return sol[:n]


def _inverse_iteration(A, c, tol, maxiter=30):
    n = A.shape[0]
    shift = 1e-7 * float(np.abs(A.diagonal()).mean() or 1.0)
    try:
        lu = spla.splu(sp.csc_matrix(A + shift * sp.identity(n)))
    except RuntimeError as exc:
        raise SolverError(f"shifted factorization failed: {exc}") from exc
    x = np.ones(n)
    normA = spla.norm(A)
    for it in range(maxiter):
        x = lu.solve(x)
        x /= np.linalg.norm(x)
        if np.linalg.norm(A @ x) <= 0.01 * tol * normA:
            break
    else:
        raise SolverError("inverse iteration did not converge", iterations=maxiter)
    return x


def solve_constrained_nullspace(A, c, tol=1e-9, method="bordered", agree_tol=1e-8):
    """Kernel vector ``m`` of ``A`` normalised by ``c @ m = 1``.

    ``method`` is ``"bordered"``, ``"inverse_iteration"`` or ``"both"``; the
    last computes both and requires agreement within ``agree_tol`` (relative,
    max norm). A second bordered solve with a perturbed constraint vector
    checks that the kernel is one-dimensional.
    """
    A = sp.csr_matrix(A)
    c = np.asarray(c, dtype=float)
    if method not in ("bordered", "inverse_iteration", "both"):
        raise ValueError(f"unknown method {method!r}")

    if method == "inverse_iteration":
        m = _normalize(_inverse_iteration(A, c, tol), c)
    else:
        m = _normalize(_bordered(A, c), c)
        if method == "both":
            m2 = _normalize(_inverse_iteration(A, c, tol), c)
            gap = np.max(np.abs(m - m2)) / np.max(np.abs(m))
            if gap > agree_tol:
                raise SolverError(f"bordered and inverse-iteration kernels differ by {gap:.2e}")

    # second candidate with a different border: equal up to scale iff the kernel is 1-D
    c2 = c * (1.0 + 0.5 * np.cos(np.arange(len(c))))
    try:
        m_alt = _normalize(_bordered(A, c2), c)
    except SolverError as exc:
        raise SolverError(f"kernel is not one-dimensional ({exc})") from exc
    gap = np.max(np.abs(m - m_alt)) / np.max(np.abs(m))
    if gap > 1e-6:
        raise SolverError(f"kernel is not one-dimensional: independent candidates differ by {gap:.2e}")

    normA = spla.norm(A)
    res = float(np.linalg.norm(A @ m))
    if res > tol * normA * np.linalg.norm(m):
        raise SolverError(f"kernel residual {res:.3e} too large", residual=res)
    return m


def dump_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
