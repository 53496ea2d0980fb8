"""Crypt geometry, the projection onto the plane, and the piecewise coefficients.

The reference cell ``P`` is a regular hexagon of unit area, flat-topped, with
two vertices on the first axis at ``(+-a, 0)``. Inside it sit two concentric
circles of radii ``r < R``: the disc ``rho < r`` is the shrunk crypt bottom
(``P3``), the annulus ``r <= rho <= R`` is the unrolled lateral wall (``P2``)
and the rest of the hexagon is the collar around the orifice (``P1``).

Scalar functions here (``coeff_A``, ``coeff_beta`` ...) evaluate one point at a
time and are the readable reference. Bulk evaluation at quadrature points goes
through :meth:`CoefficientField.sample`, which dispatches to the compiled
kernels.
"""
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError, ParameterError

SQRT3 = math.sqrt(3.0)
#: edge of the unit-area regular hexagon
EDGE_UNIT_AREA = math.sqrt(2.0) / 3.0 ** 0.75


class RegionTag(enum.Enum):
    P1 = 1  # inter-cryptal collar
    P2 = 2  # lateral wall, unrolled into an annulus
    P3 = 3  # crypt bottom


@dataclass(frozen=True)
class CryptGeometry:
    """Dimensions of one crypt, in units where the hexagon has area one."""

    a: float = EDGE_UNIT_AREA
    r: float = EDGE_UNIT_AREA / 4
    R: float = EDGE_UNIT_AREA / 2
    L: float = 14 * EDGE_UNIT_AREA

    def __post_init__(self):
        if not (self.a > 0 and self.L > 0):
            raise ParameterError("edge a and height L must be positive")
        if not (0 < self.r < self.R):
            raise ParameterError(f"need 0 < r < R, got r={self.r}, R={self.R}")
        if self.R >= self.inradius:
            raise ParameterError(
                f"orifice radius R={self.R} must stay inside the hexagon inradius {self.inradius}")

    @classmethod
    def from_edge(cls, a):
        """Default proportions ``r = a/4``, ``R = a/2``, ``L = 14a`` for edge ``a``."""
        return cls(a=a, r=a / 4, R=a / 2, L=14 * a)

    @property
    def inradius(self):
        return SQRT3 * self.a / 2

    @property
    def area(self):
        return 1.5 * SQRT3 * self.a ** 2

    @property
    def lattice_basis(self):
        """Rows are the two lattice generators of the unscaled tiling."""
        a = self.a
        return np.array([[1.5 * a, 0.5 * SQRT3 * a], [0.0, SQRT3 * a]])

    @property
    def vertices(self):
        ang = np.arange(6) * np.pi / 3
        return self.a * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def contains(self, X, tol=1e-12):
        """True where ``X`` lies in the closed hexagon (vectorised)."""
        X = np.asarray(X, dtype=float)
        x, y = np.abs(X[..., 0]), np.abs(X[..., 1])
        slack = tol * self.a
        return (y <= self.inradius + slack) & (SQRT3 * x + y <= SQRT3 * self.a + slack)


DEFAULT_GEOMETRY = CryptGeometry()


def _check_in_hexagon(X, g):
    X = np.asarray(X, dtype=float)
    if not g.contains(X):
        raise DomainError(f"point {tuple(X)} lies outside the reference hexagon")
    return X


def project_to_plane(p3, g=DEFAULT_GEOMETRY, tol=1e-12):
    """Map a point of the 3D crypt surface onto the plane hexagon.

    The collar at height ``L`` is kept as is, the lateral wall of radius ``R``
    is shrunk radially by ``(r + x3 (R - r) / L) / R`` and the bottom disc by
    ``r / R``.
    """
    x1, x2, x3 = (float(v) for v in p3)
    rho = math.hypot(x1, x2)
    t = tol * max(g.L, 1.0)
    if abs(x3 - g.L) <= t and rho > g.R and g.contains((x1, x2)):
        return np.array([x1, x2])
    if abs(rho - g.R) <= t and 0.0 < x3 <= g.L + t:
        f = (g.r + min(x3, g.L) / g.L * (g.R - g.r)) / g.R
        return np.array([f * x1, f * x2])
    if abs(x3) <= t and rho <= g.R + t:
        return g.r / g.R * np.array([x1, x2])
    raise DomainError(f"point {(x1, x2, x3)} is not on the crypt surface")


def region_of(X, g=DEFAULT_GEOMETRY):
    X = _check_in_hexagon(X, g)
    rho = math.hypot(X[0], X[1])
    if rho < g.r:
        return RegionTag.P3
    if rho <= g.R:
        return RegionTag.P2
    return RegionTag.P1


def crypt_height_at(X, g=DEFAULT_GEOMETRY):
    """Height ``x3`` on the crypt wall of the surface point projecting to ``X``."""
    reg = region_of(X, g)
    if reg is RegionTag.P3:
        return 0.0
    if reg is RegionTag.P1:
        return g.L
    rho = math.hypot(X[0], X[1])
    return g.L * (rho - g.r) / (g.R - g.r)


def coeff_A(X, g=DEFAULT_GEOMETRY):
    """The 2x2 diffusion tensor induced by unrolling the crypt onto the plane."""
    reg = region_of(X, g)
    if reg is RegionTag.P1:
        return np.eye(2)
    if reg is RegionTag.P3:
        return (g.r / g.R) ** 2 * np.eye(2)
    x1, x2 = float(X[0]), float(X[1])
    rho2 = x1 * x1 + x2 * x2
    k = (g.R - g.r) ** 2 / (g.L ** 2 * rho2)
    g1 = rho2 / g.R ** 2 + k * x1 * x1
    g2 = rho2 / g.R ** 2 + k * x2 * x2
    g3 = k * x1 * x2
    return np.array([[g1, g3], [g3, g2]])


def coeff_divA(X, g=DEFAULT_GEOMETRY):
    """Row divergence ``sum_j dA_ij / dX_j`` inside the region containing ``X``.

    Interface jumps across the two circles are not included.
    """
    reg = region_of(X, g)
    if reg is not RegionTag.P2:
        return np.zeros(2)
    x = np.asarray(X, dtype=float)
    rho2 = float(x @ x)
    k = (g.R - g.r) ** 2 / g.L ** 2
    return 2.0 * x / g.R ** 2 + k * x / rho2


def ellipticity_bound(g=DEFAULT_GEOMETRY):
    return (g.r / g.R) ** 2


def wrap_to_cell(X, eps, g=DEFAULT_GEOMETRY, offset=(0.0, 0.0)):
    """Fold ``X / eps`` back into the fundamental hexagon.

    Returns ``(Y, (i, j))`` such that ``X / eps + offset = Y + i b1 + j b2``.
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    Y, idx = kernels.wrap_points(np.asarray(X, dtype=float).reshape(1, 2), eps, g.a, offset)
    return Y[0], (int(idx[0, 0]), int(idx[0, 1]))


@dataclass(frozen=True)
class CoefficientSample:
    """Coefficients at a batch of points; ``A`` packed as (A11, A12, A22)."""

    A: np.ndarray
    divA: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise coefficients of the cell model plus reaction parameters.

    The ``*_const`` fields replace the geometric definition by a constant; they
    exist for manufactured and degenerate test configurations. ``A_scale``
    multiplies ``A`` (and its divergence).
    """

    geometry: CryptGeometry = field(default_factory=CryptGeometry)
    tau_gamma: float = 0.01
    tau_beta1: float = 0.01
    beta2: float = 0.1
    D: float = 0.1
    E: float = 0.0
    A_const: Optional[tuple] = None
    gamma_const: Optional[float] = None
    beta_const: Optional[float] = None
    A_scale: float = 1.0

    def __post_init__(self):
        if self.E != 0.0:
            raise ParameterError("only equal diffusivities (E = 0) are supported")
        if not self.D > 0:
            raise ParameterError("diffusion D must be positive")
        if self.A_const is not None:
            A = np.asarray(self.A_const, dtype=float)
            if A.shape != (2, 2) or abs(A[0, 1] - A[1, 0]) > 0:
                raise ParameterError("A_const must be a symmetric 2x2 matrix")
            object.__setattr__(self, "A_const", tuple(map(tuple, A)))

    def with_overrides(self, **kw):
        return replace(self, **kw)

    def gamma_at(self, X):
        """Birth rate of normal cells at ``X`` in the hexagon."""
        if self.gamma_const is not None:
            _check_in_hexagon(X, self.geometry)
            return float(self.gamma_const)
        x3 = crypt_height_at(X, self.geometry)
        cut = 2.0 * self.geometry.L / 3.0
        return self.tau_gamma * (x3 - cut) ** 2 if x3 <= cut else 0.0

    def beta_at(self, X):
        """Birth rate of abnormal cells at ``X`` in the hexagon."""
        if self.beta_const is not None:
            _check_in_hexagon(X, self.geometry)
            return float(self.beta_const)
        x3 = crypt_height_at(X, self.geometry)
        cut = 2.0 * self.geometry.L / 3.0
        return self.tau_beta1 * (x3 - cut) ** 2 + self.beta2 if x3 <= cut else self.beta2

    def A_at(self, X):
        if self.A_const is not None:
            _check_in_hexagon(X, self.geometry)
            return self.A_scale * np.array(self.A_const)
        return self.A_scale * coeff_A(X, self.geometry)

    def divA_at(self, X):
        if self.A_const is not None:
            _check_in_hexagon(X, self.geometry)
            return np.zeros(2)
        return self.A_scale * coeff_divA(X, self.geometry)

    def sample(self, Y):
        """Evaluate all coefficients at points ``Y`` (n, 2) of the hexagon."""
        g = self.geometry
        Y = np.asarray(Y, dtype=float).reshape(-1, 2)
        A, div, gam, bet = kernels.coefficients(
            Y, g.r, g.R, g.L, self.tau_gamma, self.tau_beta1, self.beta2)
        if self.A_const is not None:
            c = np.asarray(self.A_const)
            A = np.empty((len(Y), 3))
            A[:] = (c[0, 0], c[0, 1], c[1, 1])
            div = np.zeros((len(Y), 2))
        if self.A_scale != 1.0:
            A = A * self.A_scale
            div = div * self.A_scale
        if self.gamma_const is not None:
            gam = np.full(len(Y), float(self.gamma_const))
        if self.beta_const is not None:
            bet = np.full(len(Y), float(self.beta_const))
        return CoefficientSample(A, div, gam, bet)

    def sample_periodic(self, X, eps, offset=(0.0, 0.0)):
        """Coefficients of the ``eps``-periodic medium at physical points ``X``.

        Derivatives pick up the chain-rule factor ``1 / eps``.
        """
        Y, _ = kernels.wrap_points(np.asarray(X, dtype=float).reshape(-1, 2), eps, self.geometry.a, offset)
        s = self.sample(Y)
        return CoefficientSample(s.A, s.divA / eps, s.gamma, s.beta)


def coeff_gamma(X, coeffs=CoefficientField()):
    return coeffs.gamma_at(X)


def coeff_beta(X, coeffs=CoefficientField()):
    return coeffs.beta_at(X)
