"""Run configuration and trajectories shared by the two evolution solvers."""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ProtocolError
from .mesh import QuadMesh, gauss_rule, quad_mesh_rect, bilinear_shape


def _is_multiple(t, dt):
    k = round(t / dt)
    return abs(k * dt - t) <= 1e-9 * max(1.0, abs(t))


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and protocol of one evolution run.

    ``eps`` is only meaningful for the heterogeneous solver; ``offset`` shifts
    the lattice (in cell units) under the domain.
    """

    h: float = 5e-3
    dt: float = 5e-3
    T: float = 0.05
    output_times: tuple = (0.01, 0.03, 0.05)
    eps: Optional[float] = None
    offset: tuple = (0.0, 0.0)
    tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "output_times", tuple(float(t) for t in self.output_times))
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
        if not self.h > 0:
            raise ConfigError("h must be positive")
        n = round(2.0 / self.h)
        if n < 1 or abs(n * self.h - 2.0) > 1e-9:
            raise ConfigError(f"2/h must be an integer, got {2.0 / self.h:g}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.T < 0 or not _is_multiple(self.T, self.dt):
            raise ConfigError(f"T = {self.T} must be a non-negative multiple of dt = {self.dt}")
        ts = self.output_times
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("output times must be strictly increasing")
        for t in ts:
            if t <= 0 or t > self.T * (1 + 1e-12):
                raise ConfigError(f"output time {t} outside (0, T = {self.T}]")
            if not _is_multiple(t, self.dt):
                raise ConfigError(f"output time {t} is not a multiple of dt = {self.dt}")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def output_steps(self):
        return {int(round(t / self.dt)): t for t in self.output_times}

    def check_resolution(self, a):
        """Enforce ``h <= eps a / 4``: the inner circle must contain whole elements."""
        if self.eps is None:
            raise ConfigError("the heterogeneous solver needs eps")
        bound = self.eps * a / 4
        if self.h > bound * (1 + 1e-12):
            raise ConfigError(
                f"h = {self.h:g} violates the resolvability rule h <= eps*a/4 = {bound:.6g} "
                f"(eps = {self.eps:g}, a = {a:.6g})")

    def with_(self, **kw):
        from dataclasses import replace
        return replace(self, **kw)


def initial_density(X):
    """Initial abnormal-cell density, a centred Gaussian of peak 0.9.

    Values on the boundary of ``[-1, 1]^2`` are set to zero so that the initial
    state satisfies the Dirichlet condition.
    """
    X = np.asarray(X, dtype=float)
    c = 0.9 * np.exp(-(X[..., 0] ** 2 + X[..., 1] ** 2) / 0.1)
    on_boundary = np.maximum(np.abs(X[..., 0]), np.abs(X[..., 1])) >= 1.0 - 1e-12
    c = np.where(on_boundary, 0.0, c)
    return float(c) if c.ndim == 0 else c


@dataclass
class Trajectory:
    """Recorded ``(t, C, p)`` states on the nodes of a quad mesh."""

    mesh: QuadMesh
    times: list = field(default_factory=list)
    C: list = field(default_factory=list)
    p: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, t, C, p):
        if self.times and not t > self.times[-1]:
            raise ProtocolError(f"time {t} does not follow {self.times[-1]}")
        self.times.append(float(t))
        self.C.append(np.asarray(C, dtype=float).copy())
        self.p.append(np.asarray(p, dtype=float).copy())

    def index(self, t, tol=1e-9):
        for i, s in enumerate(self.times):
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return i
        raise ProtocolError(f"time {t} not recorded (have {self.times})")

    def at(self, t):
        i = self.index(t)
        return self.C[i], self.p[i]

    def save(self, path):
        np.savez_compressed(path, h=self.mesh.h, times=np.array(self.times),
                            C=np.array(self.C), p=np.array(self.p))

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            mesh = quad_mesh_rect(float(z["h"]))
            return cls(mesh=mesh, times=list(z["times"]), C=list(z["C"]), p=list(z["p"]))


def l2_error(mesh, u, exact, rule=None):
    """``|| u_h - exact ||_L2`` with a tensor Gauss rule (3x3 by default)."""
    rule = rule or gauss_rule(3)
    N, _ = bilinear_shape(rule.points)
    Xq = mesh.quadrature_points(rule)
    uq = np.asarray(u)[mesh.elements] @ N.T
    w = rule.weights * (mesh.h / 2) ** 2
    return math.sqrt(float(np.sum(w * (uq - exact(Xq[..., 0], Xq[..., 1])) ** 2)))


def write_fields_csv(path, mesh, values):
    """One row per node: ``node, X1, X2, value``."""
    arr = np.column_stack([np.arange(mesh.n_nodes), mesh.nodes, values])
    np.savetxt(path, arr, delimiter=",", header="node,X1,X2,value", comments="",
               fmt=["%d", "%.17g", "%.17g", "%.17g"])


def trajectory_csv_files(traj, outdir, prefix):
    outdir = Path(outdir)
    files = []
    for t, C, p in zip(traj.times, traj.C, traj.p):
        for name, v in (("C", C), ("p", p)):
            f = outdir / f"{prefix}_{name}_t{t:.6g}.csv"
            write_fields_csv(f, traj.mesh, v)
            files.append(f)
    return files
