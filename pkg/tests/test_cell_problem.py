import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad
from scipy.spatial import cKDTree

from crypthom.cell_problem import (HomCoeffs, assemble_adjoint_operator, homogenized_coefficients,
                                   rotation_matrix, solve_cell_problem, solve_density, triangle_rule)
from crypthom.errors import ConfigError, ParameterError, PositivityError
from crypthom.geometry import DEFAULT_GEOMETRY as G, CoefficientField
from crypthom.mesh import periodic_dof_map, triangulate_hexagon

IDENTITY = CoefficientField(A_const=np.eye(2))


def beta_integral_oracle(tau=0.01, beta2=0.1, g=G):
    """int_P beta dY for the radial beta profile, by adaptive 1-D quadrature."""
    cut = 2 * g.L / 3

    def excess(rho):
        x3 = 0.0 if rho < g.r else g.L * (rho - g.r) / (g.R - g.r)
        return tau * (x3 - cut) ** 2 if x3 <= cut else 0.0

    rho_cut = g.r + (g.R - g.r) * 2 / 3
    inner = quad(lambda r: excess(r) * r, 0, g.r)[0] + quad(lambda r: excess(r) * r, g.r, rho_cut)[0]
    return beta2 * g.area + 2 * math.pi * inner


@pytest.mark.parametrize("A", [np.eye(2), 3.5 * np.eye(2)])
def test_constant_A_gives_unit_density(A):
    m, hc = solve_cell_problem(8, CoefficientField(A_const=A))
    assert np.allclose(m.values, 1.0, atol=1e-10)
    assert np.allclose(hc.Am, A, atol=1e-10 * A[0, 0])
    assert m.integral() == pytest.approx(1.0, abs=1e-12)


def test_identity_beta_average_matches_radial_oracle():
    m, hc = solve_cell_problem(32, IDENTITY)
    exact = beta_integral_oracle()
    # the circles are not resolved by the mesh: first-order sampling error
    assert hc.beta_m == pytest.approx(exact, rel=2e-4)
    hc7 = homogenized_coefficients(m, IDENTITY, rule=triangle_rule(7))
    assert hc7.beta_m == pytest.approx(exact, rel=2e-4)


def test_constant_beta_gives_beta2():
    m, hc = solve_cell_problem(16, CoefficientField(tau_beta1=0.0, tau_gamma=0.0))
    assert hc.beta_m == pytest.approx(0.1, abs=1e-12)
    assert hc.gamma_m == pytest.approx(0.0, abs=1e-15)


def test_crypt_density_properties(crypt_cell):
    m, hc = crypt_cell
    assert m.integral() == pytest.approx(1.0, abs=1e-12)
    assert m.values.min() > 0
    K = assemble_adjoint_operator(m.mesh, m.dofs)
    assert np.linalg.norm(K @ m.values) <= 1e-9 * spla.norm(K) * np.linalg.norm(m.values)
    assert abs(np.ones(K.shape[0]) @ (K @ m.values)) <= 1e-9 * spla.norm(K)
    hc.validate()
    assert np.all(np.linalg.eigvalsh(hc.Am) > 0)
    assert abs(hc.Am[0, 1]) <= 0.01 * hc.Am[0, 0]
    assert abs(hc.Am[0, 0] / hc.Am[1, 1] - 1) <= 0.01
    assert hc.beta_m >= hc.gamma_m >= 0


def test_crypt_density_rotation_symmetry(crypt_cell):
    m, _ = crypt_cell
    nodes, values = m.mesh.nodes, m.nodal
    tree = cKDTree(nodes)
    dist, idx = tree.query(nodes @ rotation_matrix().T)
    assert dist.max() < 1e-9  # rotated nodes are nodes
    assert np.max(np.abs(values[idx] - values)) < 1e-6


def test_A_scaling():
    m1, hc1 = solve_cell_problem(16)
    m2, hc2 = solve_cell_problem(16, CoefficientField(A_scale=2.5))
    assert np.allclose(m1.values, m2.values, rtol=1e-9)
    assert np.allclose(hc2.Am, 2.5 * hc1.Am, rtol=1e-9)
    assert hc2.beta_m == pytest.approx(hc1.beta_m, rel=1e-9)


def test_methods_agree():
    m1, _ = solve_cell_problem(16, method="bordered")
    m2, _ = solve_cell_problem(16, method="both")
    m3, _ = solve_cell_problem(16, method="inverse_iteration")
    assert np.allclose(m1.values, m2.values, atol=1e-8)
    assert np.allclose(m1.values, m3.values, atol=1e-8)


def test_positivity_violation_reported():
    mesh = triangulate_hexagon(1)
    dofs = periodic_dof_map(mesh)
    k = np.array([1.0, -0.2, 1.0])
    K = sp.csr_matrix(np.eye(3) - np.outer(k, k) / (k @ k))
    with pytest.raises(PositivityError, match="density positivity violated") as info:
        solve_density(K, mesh, dofs)
    assert info.value.min_value < 0


# -- HomCoeffs ----------------------------------------------------------------------

def test_homcoeffs_text_round_trip(tmp_path, crypt_hc):
    crypt_hc.save(tmp_path / "c.txt")
    back = HomCoeffs.load(tmp_path / "c.txt")
    assert np.array_equal(back.Am, crypt_hc.Am)
    assert (back.beta_m, back.gamma_m, back.D) == (crypt_hc.beta_m, crypt_hc.gamma_m, crypt_hc.D)


@pytest.mark.parametrize("text,line", [("Am11 1\n", 1), ("Am11 = 1\nfoo = 2\n", 2),
                                       ("Am11 = x\n", 1), ("Am11 = 1\n", None)])
def test_homcoeffs_parse_errors(text, line):
    with pytest.raises(ConfigError) as info:
        HomCoeffs.from_text(text)
    assert info.value.line == line


@pytest.mark.parametrize("kw", [dict(Am=-np.eye(2)), dict(beta_m=0.0, gamma_m=0.1), dict(D=0.0),
                                dict(Am=np.array([[1.0, 0.5], [0.0, 1.0]]))])
def test_homcoeffs_validate(kw):
    base = dict(Am=np.eye(2), beta_m=0.2, gamma_m=0.1, D=0.1)
    base.update(kw)
    with pytest.raises(ParameterError):
        HomCoeffs(**base).validate()
