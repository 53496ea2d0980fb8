"""Hot numeric kernels.

Every kernel exists twice: ``<name>_numba`` (compiled loop, ``None`` when
numba is missing) and ``<name>_numpy`` (vectorised). The bare ``<name>`` is
bound to one of them according to :data:`crypthom._accel.USE_NUMBA`.

Conventions shared by all kernels
---------------------------------
* Reference hexagon is flat-topped, centred at the origin, with vertices at
  ``(+-a, 0)``. Lattice basis ``b1 = (3a/2, sqrt(3)a/2)``, ``b2 = (0, sqrt(3)a)``.
* Symmetric 2x2 tensors are packed as ``[..., 0] = T11``, ``[..., 1] = T12``,
  ``[..., 2] = T22``.
* Element matrices are indexed ``[e, k, l]`` with ``k`` the test function and
  ``l`` the trial function.
"""
import math

import numpy as np

from . import _accel

SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# lattice wrapping (axial coordinates + cube rounding)
# ---------------------------------------------------------------------------

def _wrap_points_loop(X, eps, a, offset):
    n = X.shape[0]
    Y = np.empty((n, 2))
    idx = np.empty((n, 2), dtype=np.int64)
    for k in range(n):
        z1 = X[k, 0] / eps + offset[0]
        z2 = X[k, 1] / eps + offset[1]
        q = (2.0 / 3.0) * z1 / a
        r = (-z1 / 3.0 + SQRT3 / 3.0 * z2) / a
        s = -q - r
        qi = math.floor(q + 0.5)
        ri = math.floor(r + 0.5)
        si = math.floor(s + 0.5)
        dq = abs(qi - q)
        dr = abs(ri - r)
        ds = abs(si - s)
        if dq > dr and dq > ds:
            qi = -ri - si
        elif dr > ds:
            ri = -qi - si
        Y[k, 0] = z1 - 1.5 * a * qi
        Y[k, 1] = z2 - 0.5 * SQRT3 * a * qi - SQRT3 * a * ri
        idx[k, 0] = int(qi)
        idx[k, 1] = int(ri)
    return Y, idx


def wrap_points_numpy(X, eps, a, offset):
    X = np.asarray(X, dtype=float)
    z1 = X[:, 0] / eps + offset[0]
    z2 = X[:, 1] / eps + offset[1]
    q = (2.0 / 3.0) * z1 / a
    r = (-z1 / 3.0 + SQRT3 / 3.0 * z2) / a
    s = -q - r
    qi = np.floor(q + 0.5)
    ri = np.floor(r + 0.5)
    si = np.floor(s + 0.5)
    dq = np.abs(qi - q)
    dr = np.abs(ri - r)
    ds = np.abs(si - s)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    qi = np.where(fix_q, -ri - si, qi)
    ri = np.where(fix_r, -qi - si, ri)
    Y = np.empty((X.shape[0], 2))
    Y[:, 0] = z1 - 1.5 * a * qi
    Y[:, 1] = z2 - 0.5 * SQRT3 * a * qi - SQRT3 * a * ri
    idx = np.stack([qi, ri], axis=1).astype(np.int64)
    return Y, idx


# ---------------------------------------------------------------------------
# piecewise coefficients on the reference hexagon
# ---------------------------------------------------------------------------

def _coefficients_loop(Y, r, R, L, tau_g, tau_b, beta2):
    n = Y.shape[0]
    A = np.empty((n, 3))
    div = np.zeros((n, 2))
    gam = np.empty(n)
    bet = np.empty(n)
    k = (R - r) ** 2 / L ** 2
    inner = (r / R) ** 2
    cut = 2.0 * L / 3.0
    for i in range(n):
        y1 = Y[i, 0]
        y2 = Y[i, 1]
        rho2 = y1 * y1 + y2 * y2
        rho = math.sqrt(rho2)
        if rho < r:
            A[i, 0] = inner
            A[i, 1] = 0.0
            A[i, 2] = inner
            x3 = 0.0
        elif rho <= R:
            A[i, 0] = rho2 / R ** 2 + k * y1 * y1 / rho2
            A[i, 1] = k * y1 * y2 / rho2
            A[i, 2] = rho2 / R ** 2 + k * y2 * y2 / rho2
            div[i, 0] = 2.0 * y1 / R ** 2 + k * y1 / rho2
            div[i, 1] = 2.0 * y2 / R ** 2 + k * y2 / rho2
            x3 = L * (rho - r) / (R - r)
        else:
            A[i, 0] = 1.0
            A[i, 1] = 0.0
            A[i, 2] = 1.0
            x3 = L
        if x3 <= cut:
            t = (x3 - cut) ** 2
            gam[i] = tau_g * t
            bet[i] = tau_b * t + beta2
        else:
            gam[i] = 0.0
            bet[i] = beta2
    return A, div, gam, bet


def coefficients_numpy(Y, r, R, L, tau_g, tau_b, beta2):
    Y = np.asarray(Y, dtype=float)
    y1, y2 = Y[:, 0], Y[:, 1]
    rho2 = y1 * y1 + y2 * y2
    rho = np.sqrt(rho2)
    p3 = rho < r
    p2 = ~p3 & (rho <= R)
    k = (R - r) ** 2 / L ** 2
    safe = np.where(p2, rho2, 1.0)
    n = Y.shape[0]
    A = np.empty((n, 3))
    A[:, 0] = np.where(p2, rho2 / R ** 2 + k * y1 * y1 / safe, 1.0)
    A[:, 1] = np.where(p2, k * y1 * y2 / safe, 0.0)
    A[:, 2] = np.where(p2, rho2 / R ** 2 + k * y2 * y2 / safe, 1.0)
    A[p3, 0] = (r / R) ** 2
    A[p3, 2] = (r / R) ** 2
    div = np.zeros((n, 2))
    div[:, 0] = np.where(p2, 2.0 * y1 / R ** 2 + k * y1 / safe, 0.0)
    div[:, 1] = np.where(p2, 2.0 * y2 / R ** 2 + k * y2 / safe, 0.0)
    x3 = np.where(p3, 0.0, np.where(p2, L * (rho - r) / (R - r), L))
    cut = 2.0 * L / 3.0
    t = (x3 - cut) ** 2
    below = x3 <= cut
    gam = np.where(below, tau_g * t, 0.0)
    bet = np.where(below, tau_b * t + beta2, beta2)
    return A, div, gam, bet


# ---------------------------------------------------------------------------
# element matrices for the general first-order bilinear form
#
#   a(u, v) = sum_q w [ grad v . K grad u + (b . grad u) v + (c . grad v) u + d u v ]
#
# dN: (G, nq, nl, 2) shape-function gradients, G == 1 (shared geometry) or nel
# W:  (G, nq) quadrature weights times |det J|
# N:  (nq, nl) shape-function values
# K:  (nel, nq, 3) packed symmetric tensor, or empty (0, nq, 3) to skip
# b, c: (nel, nq, 2) or empty; d: (nel, nq) or empty
# ---------------------------------------------------------------------------

def _element_matrices_loop(dN, W, N, K, b, c, d, nel):
    nq = N.shape[0]
    nl = N.shape[1]
    G = dN.shape[0]
    hasK = K.shape[0] > 0
    hasb = b.shape[0] > 0
    hasc = c.shape[0] > 0
    hasd = d.shape[0] > 0
    out = np.zeros((nel, nl, nl))
    for e in range(nel):
        g = e if G > 1 else 0
        for q in range(nq):
            w = W[g, q]
            k11 = k12 = k22 = b1 = b2 = c1 = c2 = 0.0
            if hasK:
                k11 = K[e, q, 0]
                k12 = K[e, q, 1]
                k22 = K[e, q, 2]
            if hasb:
                b1 = b[e, q, 0]
                b2 = b[e, q, 1]
            if hasc:
                c1 = c[e, q, 0]
                c2 = c[e, q, 1]
            dd = d[e, q] if hasd else 0.0
            for kk in range(nl):
                gk1 = dN[g, q, kk, 0]
                gk2 = dN[g, q, kk, 1]
                nk = N[q, kk]
                for ll in range(nl):
                    gl1 = dN[g, q, ll, 0]
                    gl2 = dN[g, q, ll, 1]
                    nl_ = N[q, ll]
                    s = dd * nk * nl_
                    if hasK:
                        s += gk1 * (k11 * gl1 + k12 * gl2) + gk2 * (k12 * gl1 + k22 * gl2)
                    if hasb:
                        s += (b1 * gl1 + b2 * gl2) * nk
                    if hasc:
                        s += (c1 * gk1 + c2 * gk2) * nl_
                    out[e, kk, ll] += w * s
    return out


def element_matrices_numpy(dN, W, N, K, b, c, d, nel):
    nq, nl = N.shape
    dNb = np.broadcast_to(dN, (nel,) + dN.shape[1:]) if dN.shape[0] == 1 else dN
    Wb = np.broadcast_to(W, (nel, nq)) if W.shape[0] == 1 else W
    out = np.zeros((nel, nl, nl))
    if K.shape[0] > 0:
        Kf = np.empty((nel, nq, 2, 2))
        Kf[..., 0, 0] = K[..., 0]
        Kf[..., 0, 1] = K[..., 1]
        Kf[..., 1, 0] = K[..., 1]
        Kf[..., 1, 1] = K[..., 2]
        KdN = np.einsum("eqij,eqlj->eqli", Kf, dNb)
        out += np.einsum("eq,eqki,eqli->ekl", Wb, dNb, KdN, optimize=True)
    if b.shape[0] > 0:
        bg = np.einsum("eqj,eqlj->eql", b, dNb)
        out += np.einsum("eq,qk,eql->ekl", Wb, N, bg, optimize=True)
    if c.shape[0] > 0:
        cg = np.einsum("eqi,eqki->eqk", c, dNb)
        out += np.einsum("eq,eqk,ql->ekl", Wb, cg, N, optimize=True)
    if d.shape[0] > 0:
        out += np.einsum("eq,eq,qk,ql->ekl", Wb, d, N, N, optimize=True)
    return out


wrap_points_numba = _accel.njit(_wrap_points_loop)
coefficients_numba = _accel.njit(_coefficients_loop)
element_matrices_numba = _accel.njit(_element_matrices_loop)


def _contiguous(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def wrap_points(X, eps, a, offset=(0.0, 0.0)):
    """Fold points ``X`` into the fundamental hexagon of the ``eps``-scaled lattice.

    Returns ``(Y, idx)`` with ``X / eps + offset = Y + idx[:, 0] * b1 + idx[:, 1] * b2``.
    """
    X = _contiguous(np.atleast_2d(X))
    off = _contiguous(offset)
    if _accel.USE_NUMBA:
        return wrap_points_numba(X, float(eps), float(a), off)
    return wrap_points_numpy(X, eps, a, off)


def coefficients(Y, r, R, L, tau_g, tau_b, beta2):
    """Sample ``(A, div A, gamma, beta)`` at points of the reference hexagon."""
    Y = _contiguous(np.atleast_2d(Y))
    args = tuple(float(v) for v in (r, R, L, tau_g, tau_b, beta2))
    if _accel.USE_NUMBA:
        return coefficients_numba(Y, *args)
    return coefficients_numpy(Y, *args)


def element_matrices(dN, W, N, nel, K=None, b=None, c=None, d=None):
    """Element matrices of the general bilinear form (see module comment)."""
    nq = N.shape[0]
    K = np.zeros((0, nq, 3)) if K is None else _contiguous(K)
    b = np.zeros((0, nq, 2)) if b is None else _contiguous(b)
    c = np.zeros((0, nq, 2)) if c is None else _contiguous(c)
    d = np.zeros((0, nq)) if d is None else _contiguous(d)
    dN = _contiguous(dN)
    W = _contiguous(W)
    N = _contiguous(N)
    if _accel.USE_NUMBA:
        return element_matrices_numba(dN, W, N, K, b, c, d, int(nel))
    return element_matrices_numpy(dN, W, N, K, b, c, d, int(nel))
