"""Independent reference implementations used as test oracles.

Nothing here calls the package's kernels or assemblers: coefficients are
written out from the model definitions, lattice folding is a brute-force
nearest-centre search, and the evolution steps are assembled into dense
matrices with explicit Python loops and solved with numpy.
"""
import math

import numpy as np

SQRT3 = math.sqrt(3.0)
A_EDGE = math.sqrt(2.0) / 3.0 ** 0.75
R_SMALL, R_BIG, HEIGHT = A_EDGE / 4, A_EDGE / 2, 14 * A_EDGE


# -- geometry -----------------------------------------------------------------

def brute_wrap(X, eps, a=A_EDGE, offset=(0.0, 0.0)):
    """Nearest lattice centre by exhaustive search over a bounded index window."""
    Z = np.asarray(X, dtype=float) / eps + np.asarray(offset)
    b1 = np.array([1.5 * a, 0.5 * SQRT3 * a])
    b2 = np.array([0.0, SQRT3 * a])
    w = int(math.ceil(np.linalg.norm(Z) / a)) + 2
    best = None
    for i in range(-w, w + 1):
        for j in range(-w, w + 1):
            c = i * b1 + j * b2
            d = float(np.sum((Z - c) ** 2))
            if best is None or d < best[0]:
                best = (d, i, j, Z - c)
    return best[3], (best[1], best[2])


def model_coefficients(Y, r=R_SMALL, R=R_BIG, L=HEIGHT, tau_g=0.01, tau_b=0.01, beta2=0.1):
    """``(A 2x2, divA 2, gamma, beta)`` at one point of the reference hexagon."""
    y1, y2 = float(Y[0]), float(Y[1])
    rho = math.hypot(y1, y2)
    if rho < r:
        A = (r / R) ** 2 * np.eye(2)
        div = np.zeros(2)
        x3 = 0.0
    elif rho <= R:
        k = (R - r) ** 2 / L ** 2
        A = rho ** 2 / R ** 2 * np.eye(2) + k * np.outer([y1, y2], [y1, y2]) / rho ** 2
        div = (2 / R ** 2 + k / rho ** 2) * np.array([y1, y2])
        x3 = L * (rho - r) / (R - r)
    else:
        A = np.eye(2)
        div = np.zeros(2)
        x3 = L
    cut = 2 * L / 3
    gamma = tau_g * (x3 - cut) ** 2 if x3 <= cut else 0.0
    beta = tau_b * (x3 - cut) ** 2 + beta2 if x3 <= cut else beta2
    return A, div, gamma, beta


# -- Q1 elements on [-1, 1]^2 ---------------------------------------------------

_CORNERS = [(-1, -1), (1, -1), (1, 1), (-1, 1)]


def q1(xi, eta):
    N = np.array([(1 + sx * xi) * (1 + sy * eta) / 4 for sx, sy in _CORNERS])
    dN = np.array([[sx * (1 + sy * eta) / 4, sy * (1 + sx * xi) / 4] for sx, sy in _CORNERS])
    return N, dN


def grid(n):
    h = 2.0 / n
    nodes = np.array([(-1 + i * h, -1 + j * h) for j in range(n + 1) for i in range(n + 1)])
    elems = [[j * (n + 1) + i, j * (n + 1) + i + 1, (j + 1) * (n + 1) + i + 1, (j + 1) * (n + 1) + i]
             for j in range(n) for i in range(n)]
    interior = [j * (n + 1) + i for j in range(1, n) for i in range(1, n)]
    return h, nodes, elems, interior


def _gauss_points(h, origin):
    g = 1 / math.sqrt(3)
    for xi in (-g, g):
        for eta in (-g, g):
            N, dN = q1(xi, eta)
            X = origin + (np.array([xi, eta]) + 1) * h / 2
            yield X, N, dN * 2 / h, (h / 2) ** 2


def dense_fine_step(C0, n, eps, dt=5e-3, D=0.1, offset=(0.0, 0.0)):
    """One coupled step of the heterogeneous model: returns ``(p0, C1, p1)`` nodal."""
    h, nodes, elems, interior = grid(n)
    nn = len(nodes)
    K = np.zeros((nn, nn))
    M = np.zeros((nn, nn))
    Mb = np.zeros((nn, nn))
    Ms = np.zeros((nn, nn))
    gv = np.zeros(nn)
    qdata = []
    for el in elems:
        for X, N, dN, w in _gauss_points(h, nodes[el[0]]):
            Y, _ = brute_wrap(X, eps, offset=offset)
            A, div, gam, bet = model_coefficients(Y)
            div = div / eps
            qdata.append((el, N, dN, w, A, div))
            for k in range(4):
                gv[el[k]] += w * gam * N[k]
                for l in range(4):
                    K[el[k], el[l]] += w * (dN[k] @ A @ dN[l] + div @ dN[l] * N[k])
                    M[el[k], el[l]] += w * N[k] * N[l]
                    Mb[el[k], el[l]] += w * bet * N[k] * N[l]
                    Ms[el[k], el[l]] += w * (bet - gam) * N[k] * N[l]
    I = np.array(interior)
    sub = np.ix_(I, I)

    def pressure(C):
        p = np.zeros(nn)
        p[I] = np.linalg.solve(K[sub], (Ms @ C + gv)[I])
        return p

    p0 = pressure(C0)
    Conv = np.zeros((nn, nn))
    for el, N, dN, w, A, div in qdata:
        gp = sum(p0[el[s]] * dN[s] for s in range(4))
        flux = A @ gp
        for k in range(4):
            for l in range(4):
                Conv[el[k], el[l]] += w * (flux @ dN[k] + div @ gp * N[k]) * N[l]
    S = M + dt * (D * K - Mb + Conv)
    C1 = np.zeros(nn)
    C1[I] = np.linalg.solve(S[sub], (M @ C0)[I])
    return p0, C1, pressure(C1)


def dense_homog_step(C0, n, Am, beta_m, gamma_m, D, dt=5e-3):
    """One coupled step of the homogenized model: returns ``(p0, C1, p1)`` nodal."""
    h, nodes, elems, interior = grid(n)
    nn = len(nodes)
    Am = np.asarray(Am, dtype=float)
    G = np.zeros((nn, nn))
    M = np.zeros((nn, nn))
    gv = np.zeros(nn)
    qdata = []
    for el in elems:
        for X, N, dN, w in _gauss_points(h, nodes[el[0]]):
            qdata.append((el, N, dN, w))
            for k in range(4):
                gv[el[k]] += w * gamma_m * N[k]
                for l in range(4):
                    G[el[k], el[l]] += w * dN[k] @ Am @ dN[l]
                    M[el[k], el[l]] += w * N[k] * N[l]
    I = np.array(interior)
    sub = np.ix_(I, I)

    def pressure(C):
        p = np.zeros(nn)
        p[I] = np.linalg.solve(G[sub], ((beta_m - gamma_m) * M @ C + gv)[I])
        return p

    p0 = pressure(C0)
    Dt = np.zeros((nn, nn))
    Mr = np.zeros((nn, nn))
    for el, N, dN, w in qdata:
        gp = sum(p0[el[s]] * dN[s] for s in range(4))
        Cq = sum(C0[el[s]] * N[s] for s in range(4))
        for k in range(4):
            for l in range(4):
                Dt[el[k], el[l]] += w * (dN[l] @ Am @ gp) * N[k]
                Mr[el[k], el[l]] += w * (beta_m - gamma_m) * (1 - Cq) * N[k] * N[l]
    S = M + dt * (-Dt + D * G - Mr)
    C1 = np.zeros(nn)
    C1[I] = np.linalg.solve(S[sub], (M @ C0)[I])
    return p0, C1, pressure(C1)


def gaussian_initial(nodes):
    C = 0.9 * np.exp(-(nodes[:, 0] ** 2 + nodes[:, 1] ** 2) / 0.1)
    C[np.max(np.abs(nodes), axis=1) >= 1 - 1e-12] = 0.0
    return C
