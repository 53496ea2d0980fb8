"""Fine-versus-homogenized error tables.

Relative errors ``|u - v| / |v|`` in a discrete L2 norm (weighted by the Q1
mass matrix, the canonical choice; the plain nodal Euclidean norm is available
as ``"l2_nodal"``) or the nodal max norm. A zero denominator gives ``None``,
printed as ``undefined``.
"""
import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ProtocolError
from .mesh import gauss_rule, quad_mesh_rect
from .linalg import Assembler
from . import kernels

NORMS = ("L2", "Linf")
QUANTITIES = ("p", "C")
UNDEFINED = "undefined"


@lru_cache(maxsize=8)
def _mass_matrix(n):
    mesh = quad_mesh_rect(2.0 / n)
    rule = gauss_rule(2)
    N, dN, W = mesh.reference_data(rule)
    Me = kernels.element_matrices(dN, W, N, 1, d=np.ones((1, len(rule.weights))))[0]
    asm = Assembler(mesh.elements, mesh.n_nodes)
    return asm.assemble(np.broadcast_to(Me, (mesh.n_elements, 4, 4)))


def mass_matrix(mesh):
    """Q1 mass matrix over all nodes of a structured mesh (cached per size)."""
    return _mass_matrix(mesh.n)


def field_norm(u, norm="L2", mesh=None):
    u = np.asarray(u, dtype=float)
    if norm == "Linf":
        return float(np.max(np.abs(u))) if u.size else 0.0
    if norm == "l2_nodal":
        return float(np.linalg.norm(u))
    if norm == "L2":
        if mesh is None:
            raise ValueError("the L2 norm needs the mesh")
        return math.sqrt(max(float(u @ (mass_matrix(mesh) @ u)), 0.0))
    raise ValueError(f"unknown norm {norm!r}")


def relative_error(u, v, norm="L2", mesh=None):
    """``|u - v| / |v|``, or ``None`` when ``|v| = 0`` (undefined)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ProtocolError(f"fields differ in size: {u.shape} vs {v.shape}")
    den = field_norm(v, norm, mesh)
    if den == 0.0:
        return None
    return field_norm(u - v, norm, mesh) / den


@dataclass(frozen=True)
class ErrorRecord:
    eps: float
    time: float
    quantity: str
    norm: str
    value: object        # float, or None when undefined
    denominator: float


def error_records(eps, traj, ref, times, norms=NORMS):
    _check_compatible(traj, ref, times)
    out = []
    for t in times:
        Cu, pu = traj.at(t)
        Cv, pv = ref.at(t)
        for q, (u, v) in (("p", (pu, pv)), ("C", (Cu, Cv))):
            for nm in norms:
                out.append(ErrorRecord(eps=eps, time=t, quantity=q, norm=nm,
                                       value=relative_error(u, v, nm, ref.mesh),
                                       denominator=field_norm(v, nm, ref.mesh)))
    return out


def _check_compatible(traj, ref, times):
    if traj.mesh.n != ref.mesh.n:
        raise ProtocolError(f"meshes differ: {traj.mesh.n} vs {ref.mesh.n} elements per side")
    for t in times:
        traj.index(t)
        ref.index(t)


def _fmt(v):
    return UNDEFINED if v is None else f"{v:.4e}"


@dataclass
class ConvergenceTables:
    """Four tables (p/L2, p/Linf, C/L2, C/Linf): rows are times, columns eps values."""

    eps: list
    times: list
    values: dict          # (quantity, norm) -> list of rows

    def table(self, quantity, norm):
        return self.values[(quantity, norm)]

    def verdicts(self, quantity, norm):
        """Per time row: errors strictly decrease from each eps to the next smaller one."""
        out = []
        for row in self.table(quantity, norm):
            pairs = list(zip(row, row[1:]))
            ok = all(a is not None and b is not None and b < a for a, b in pairs)
            out.append(ok)
        return out

    def monotone(self, quantities=QUANTITIES, norms=NORMS):
        return all(all(self.verdicts(q, n)) for q in quantities for n in norms)

    @staticmethod
    def title(quantity, norm):
        sub = "2" if norm == "L2" else "inf"
        return f"|{quantity}^eps - {quantity}^0|_{sub} / |{quantity}^0|_{sub}"

    def to_csv(self, quantity, norm):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"eps={e:g}" for e in self.eps] + ["monotone"])
        for t, row, ok in zip(self.times, self.table(quantity, norm), self.verdicts(quantity, norm)):
            w.writerow([f"{t:g}"] + [UNDEFINED if v is None else repr(float(v)) for v in row]
                       + ["yes" if ok else "no"])
        return buf.getvalue()

    def to_text(self):
        blocks = []
        for q in QUANTITIES:
            for nm in NORMS:
                head = [self.title(q, nm)] + [f"eps={e:.3g}" for e in self.eps] + ["monotone"]
                rows = [[f"t={t:g}"] + [_fmt(v) for v in row] + ["yes" if ok else "NO"]
                        for t, row, ok in zip(self.times, self.table(q, nm), self.verdicts(q, nm))]
                widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
                line = lambda r: "  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip()
                blocks.append("\n".join([line(head), line(["-" * wd for wd in widths])]
                                        + [line(r) for r in rows]))
        return "\n\n".join(blocks) + "\n"


def convergence_table(runs, ref, times, norms=NORMS):
    """Build the error tables for ``runs = [(eps, trajectory), ...]`` against ``ref``.

    Columns are ordered by decreasing eps.
    """
    runs = sorted(runs, key=lambda r: -r[0])
    values = {(q, nm): [[None] * len(runs) for _ in times] for q in QUANTITIES for nm in norms}
    for j, (eps, traj) in enumerate(runs):
        for rec in error_records(eps, traj, ref, times, norms):
            values[(rec.quantity, rec.norm)][list(times).index(rec.time)][j] = rec.value
    return ConvergenceTables(eps=[e for e, _ in runs], times=list(times), values=values)


def runtime_summary(fine_steps, homog_steps):
    """Median seconds per step of both solvers and their ratio."""
    f = float(np.median(fine_steps))
    h = float(np.median(homog_steps))
    return {"fine_step_seconds": f, "homog_step_seconds": h, "ratio": f / h if h > 0 else math.inf}
