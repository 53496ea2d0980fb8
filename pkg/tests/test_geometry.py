import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crypthom.errors import DomainError, ParameterError
from crypthom.geometry import (DEFAULT_GEOMETRY as G, EDGE_UNIT_AREA, CoefficientField,
                               CryptGeometry, RegionTag, coeff_A, coeff_beta, coeff_divA,
                               coeff_gamma, crypt_height_at, ellipticity_bound, project_to_plane,
                               region_of, wrap_to_cell)
from crypthom.cell_problem import rotation_matrix
from oracles import brute_wrap, model_coefficients

a = EDGE_UNIT_AREA


def random_hex_points(rng, n, g=G):
    out = []
    while len(out) < n:
        P = rng.uniform(-g.a, g.a, size=(2 * n, 2))
        out.extend(P[g.contains(P)])
    return np.array(out[:n])


hex_point = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(
    lambda t: np.array(t) * np.array([G.a, G.inradius])).filter(lambda X: G.contains(X))


# -- CryptGeometry ---------------------------------------------------------------

def test_default_geometry_values():
    assert G.a == pytest.approx(math.sqrt(2) / 3 ** 0.75, abs=1e-15)
    assert abs(G.area - 1.0) <= 1e-12
    assert G.r == pytest.approx(a / 4) and G.R == pytest.approx(a / 2) and G.L == pytest.approx(14 * a)
    assert 0 < G.r < G.R < G.inradius


@pytest.mark.parametrize("kw", [dict(r=0.4, R=0.3), dict(r=0.0), dict(R=0.6), dict(L=-1.0)])
def test_geometry_rejects_invalid(kw):
    with pytest.raises(ParameterError):
        CryptGeometry(**kw)


# -- projection ------------------------------------------------------------------

def test_projection_identity_on_collar():
    assert np.allclose(project_to_plane((0.45, 0.1, G.L)), (0.45, 0.1))


def test_projection_bottom_shrinks_by_r_over_R():
    Y = project_to_plane((G.R, 0.0, 0.0))
    assert G.R == pytest.approx(0.310201, abs=1e-6)
    assert Y[0] == pytest.approx(0.155101, abs=1e-6) and Y[1] == 0.0


def test_projection_seam_continuity():
    assert np.allclose(project_to_plane((G.R, 0.0, G.L)), (G.R, 0.0), atol=1e-14)
    for th in np.linspace(0, 2 * np.pi, 7):
        x = G.R * np.array([np.cos(th), np.sin(th)])
        wall_low = project_to_plane((x[0], x[1], 1e-13))
        bottom = project_to_plane((x[0], x[1], 0.0))
        assert np.allclose(wall_low, bottom, atol=1e-12)
        assert np.linalg.norm(bottom) == pytest.approx(G.r)


def test_projection_rejects_points_off_surface():
    with pytest.raises(DomainError):
        project_to_plane((0.0, 0.0, 1.0))
    with pytest.raises(DomainError):
        project_to_plane((0.05, 0.0, G.L))  # inside the orifice, no surface there


# -- regions and heights ----------------------------------------------------------

@pytest.mark.parametrize("X,tag", [((0, 0), RegionTag.P3), ((0.2, 0), RegionTag.P2),
                                   ((0.5, 0), RegionTag.P1), ((G.r, 0), RegionTag.P2),
                                   ((0, G.R), RegionTag.P2)])
def test_region_of(X, tag):
    assert region_of(X) is tag


def test_region_outside_hexagon():
    with pytest.raises(DomainError):
        region_of((0.0, 0.6))


@given(hex_point)
def test_region_partition(X):
    rho = np.linalg.norm(X)
    tags = [rho < G.r, G.r <= rho <= G.R, rho > G.R]
    assert sum(tags) == 1
    assert region_of(X) is [RegionTag.P3, RegionTag.P2, RegionTag.P1][tags.index(True)]


def test_crypt_height():
    assert crypt_height_at((0, 0)) == 0.0
    assert crypt_height_at((0.4, 0.1)) == pytest.approx(8.685645, abs=1e-6)
    assert crypt_height_at(((G.r + G.R) / 2, 0)) == pytest.approx(G.L / 2)


# -- coefficients ------------------------------------------------------------------

def test_coeff_A_examples():
    assert np.array_equal(coeff_A((0.45, 0.0)), np.eye(2))
    assert np.allclose(coeff_A((0.01, 0.02)), 0.25 * np.eye(2))
    A = coeff_A((G.R, 0.0))
    assert A[0, 0] == pytest.approx(1 + (1 / 56) ** 2, abs=1e-15)
    assert A[0, 0] == pytest.approx(1.000319, abs=1e-6)
    assert A[0, 1] == 0.0 and A[1, 1] == pytest.approx(1.0)


def test_gamma_beta_examples():
    assert coeff_gamma((0.45, 0.0)) == 0.0 and coeff_beta((0.45, 0.0)) == pytest.approx(0.1)
    assert coeff_gamma((0.0, 0.0)) == pytest.approx(0.01 * (2 * G.L / 3) ** 2)
    assert coeff_gamma((0.0, 0.0)) == pytest.approx(0.335291, abs=1e-6)
    assert coeff_beta((0.0, 0.0)) == pytest.approx(0.435291, abs=1e-6)
    cut = 5 * a / 12
    assert cut == pytest.approx(0.258501, abs=1e-6)
    assert coeff_gamma((cut, 0.0)) == pytest.approx(0.0, abs=1e-14)
    assert coeff_beta((cut, 0.0)) == pytest.approx(0.1, abs=1e-14)


def test_gamma_beta_continuous_across_circles():
    c = CoefficientField()
    for rad in (G.r, G.R):
        for th in np.linspace(0, 2 * np.pi, 13):
            u = np.array([np.cos(th), np.sin(th)])
            inside, on, outside = (rad * (1 - 1e-15)) * u, rad * u, (rad * (1 + 1e-15)) * u
            for f in (c.gamma_at, c.beta_at):
                assert abs(f(inside) - f(on)) < 1e-12
                assert abs(f(outside) - f(on)) < 1e-12


def test_ellipticity_bound():
    assert ellipticity_bound() == 0.25
    assert ellipticity_bound(CryptGeometry(r=G.R / 4)) == pytest.approx(0.0625)


def test_ellipticity_monte_carlo():
    rng = np.random.default_rng(0)
    X = random_hex_points(rng, 10_000)
    xi = rng.normal(size=(10_000, 2))
    q = [x_ @ coeff_A(X_) @ x_ / (x_ @ x_) for X_, x_ in zip(X, xi)]
    assert min(q) >= ellipticity_bound() - 1e-12


@settings(max_examples=200)
@given(hex_point)
def test_A_symmetric_and_rotation_equivariant(X):
    Q = rotation_matrix()
    A = coeff_A(X)
    assert A[0, 1] == A[1, 0]
    QX = Q @ X
    if G.contains(QX) and abs(abs(np.linalg.norm(X)) - G.r) > 1e-12 and abs(np.linalg.norm(X) - G.R) > 1e-12:
        assert np.allclose(coeff_A(QX), Q @ A @ Q.T, atol=1e-13)


def test_divA_matches_finite_differences():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(200):
        rho = rng.uniform(G.r * 1.01, G.R * 0.99)
        th = rng.uniform(0, 2 * np.pi)
        X = rho * np.array([np.cos(th), np.sin(th)])
        dA1 = (coeff_A(X + [h, 0]) - coeff_A(X - [h, 0])) / (2 * h)
        dA2 = (coeff_A(X + [0, h]) - coeff_A(X - [0, h])) / (2 * h)
        fd = np.array([dA1[0, 0] + dA2[0, 1], dA1[1, 0] + dA2[1, 1]])
        assert np.allclose(coeff_divA(X), fd, rtol=1e-6, atol=1e-8)


def test_sample_matches_model_definitions():
    rng = np.random.default_rng(2)
    Y = random_hex_points(rng, 500)
    s = CoefficientField().sample(Y)
    for k, y in enumerate(Y):
        A, div, gam, bet = model_coefficients(y)
        assert np.allclose(s.A[k], [A[0, 0], A[0, 1], A[1, 1]], atol=1e-14)
        assert np.allclose(s.divA[k], div, atol=1e-12)
        assert s.gamma[k] == pytest.approx(gam, abs=1e-14)
        assert s.beta[k] == pytest.approx(bet, abs=1e-14)
        assert s.gamma[k] >= 0 and s.beta[k] >= s.gamma[k]


def test_nonzero_E_rejected():
    with pytest.raises(ParameterError):
        CoefficientField(E=0.1)


# -- lattice folding ------------------------------------------------------------------

def test_wrap_origin():
    for eps in (0.8, 0.05, 1e-3):
        Y, idx = wrap_to_cell((0.0, 0.0), eps)
        assert np.allclose(Y, 0) and idx == (0, 0)


def test_wrap_one_lattice_step():
    eps = 0.4
    Y, idx = wrap_to_cell(eps * np.array([1.5 * a, 0.5 * math.sqrt(3) * a]), eps)
    assert np.allclose(Y, 0, atol=1e-12) and idx == (1, 0)


@settings(max_examples=300)
@given(st.floats(-1, 1), st.floats(-1, 1), st.sampled_from([0.8, 0.4, 0.2, 0.05, 0.0323]))
def test_wrap_matches_brute_force(x, y, eps):
    Y, idx = wrap_to_cell((x, y), eps)
    Yb, idxb = brute_wrap((x, y), eps)
    assert G.contains(Y, tol=1e-9)
    if idx != idxb:  # only possible on a cell boundary, where both centres are nearest
        assert abs(np.linalg.norm(Y) - np.linalg.norm(Yb)) < 1e-9
    else:
        assert np.allclose(Y, Yb, atol=1e-9)
    b = G.lattice_basis
    assert np.allclose(np.array([x, y]) / eps, Y + idx[0] * b[0] + idx[1] * b[1], atol=1e-9)


@settings(max_examples=200)
@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(-5, 5), st.integers(-5, 5))
def test_region_translation_invariant(x, y, i, j):
    eps = 0.2
    b = G.lattice_basis
    X = np.array([x, y])
    Y0, _ = wrap_to_cell(X, eps)
    Y1, _ = wrap_to_cell(X + eps * (i * b[0] + j * b[1]), eps)
    # both images agree modulo the lattice; they coincide unless Y0 is on the hexagon edge
    k = np.linalg.solve(b.T, Y1 - Y0)
    assert np.allclose(k, np.round(k), atol=1e-8)
    if G.contains(Y0 * (1 + 1e-8)):
        assert np.allclose(Y0, Y1, atol=1e-9)
    rho = np.linalg.norm(Y0)
    if min(abs(rho - G.r), abs(rho - G.R)) > 1e-8:
        assert region_of(Y0) is region_of(Y1)
