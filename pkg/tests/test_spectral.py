import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structcons import spectral as sp
from structcons.errors import EmptyInterval, NoRootAboveOne
from structcons.topology import (
    build_topology,
    five_agent_topology,
    laplacian,
    laplacian_stack,
    canonical_topology,
    random_topology,
    sample_weights,
)


# ------------------------------------------------------------ first order


def test_epsilon_bound_canonical():
    assert sp.epsilon_bound(canonical_topology()) == pytest.approx(1 / 3)


def test_epsilon_bound_single_edge():
    t = build_topology(2, 0, [(0, 1, 1.0)], 0.5)
    assert sp.epsilon_bound(t) == pytest.approx(2 / 3)


def test_epsilon_bound_tiny_delta():
    t = build_topology(3, 0, [(0, 1, 1.0), (0, 2, 2.0), (1, 2, 1.5)], 1e-12)
    assert sp.epsilon_bound(t) == pytest.approx(1 / 3.5)


def test_gershgorin_check_cases():
    L = np.array([[0.0, 0.0], [-2.0, 2.0]])
    assert sp.gershgorin_check(L, 0.3)
    L = np.array([[0.0, 0.0], [-2.5, 2.5]])
    assert not sp.gershgorin_check(L, 0.4)
    assert sp.gershgorin_check(np.zeros((2, 2)), 100.0)


def test_gershgorin_discs_contain_eigenvalues():
    t = canonical_topology()
    L = laplacian(t, sample_weights(t, 1, 2).weights[0])
    discs = sp.gershgorin_discs(L, 0.3)
    for lam in np.linalg.eigvals(0.3 * L):
        assert any(abs(lam - c) <= r + 1e-12 for c, r in discs)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 8))
def test_epsilon_within_bound_contracts(seed, n):
    t = random_topology(np.random.default_rng(seed), n)
    eps = 0.99 * sp.epsilon_bound(t)
    for L in laplacian_stack(t, sample_weights(t, 5, seed).weights):
        assert sp.gershgorin_check(L, eps)
        assert sp.spectral_radius_excess(sp.iteration_matrix(L, eps)) < 1


# ------------------------------------------------------------ spectral box


def test_single_edge_box():
    t = build_topology(2, 0, [(0, 1, 1.0)], 0.5)
    mus = sp.sampled_nonzero_eigenvalues(t, 500, 0)
    assert np.all(np.abs(mus.imag) < 1e-12)
    assert mus.real.min() >= 0.5 and mus.real.max() <= 1.5
    # pre-margin angle is 0, so the widened angle is exactly margin * pi/2
    box = sp.estimate_spectral_box(t, 500, 0, margin=0.1)
    assert box.theta_max == pytest.approx(0.1 * math.pi / 2)
    assert box.r_min == pytest.approx(0.9 * mus.real.min())
    assert box.r_max == pytest.approx(1.1 * mus.real.max())


def test_canonical_spectrum_right_half_plane():
    mus = sp.sampled_nonzero_eigenvalues(canonical_topology(), 10_000, 1)
    assert np.all(mus.real > 0)


def test_box_deterministic_and_contains_samples():
    t = canonical_topology()
    a = sp.estimate_spectral_box(t, 300, 9)
    assert a == sp.estimate_spectral_box(t, 300, 9)
    for mu in sp.sampled_nonzero_eigenvalues(t, 300, 9).ravel():
        assert a.contains(mu)


def test_nonzero_eigenvalues_drop_structural_zero():
    t = canonical_topology()
    L = laplacian(t, np.ones(4))
    full = np.sort_complex(np.linalg.eigvals(L))
    mus = np.sort_complex(sp.nonzero_eigenvalues(L))
    assert mus.size == 3
    np.testing.assert_allclose(np.sort_complex(np.append(mus, 0)), full, atol=1e-10)


# -------------------------------------------------------------- rho / kappa


def _rho_oracle(varrho, theta):
    """Both roots of c r^2 - (2c + 2) r + (c + 1) = 0 by the textbook formula."""
    c = varrho / math.tan(theta)
    roots = np.roots([c, -(2 * c + 2), c + 1])
    return sorted(roots.real)


def test_rho_example():
    rho = sp.solve_rho(0.5, math.pi / 4)
    assert rho == pytest.approx(3 + math.sqrt(6), rel=1e-12)
    assert (2 * rho - 1) / (rho - 1) ** 2 == pytest.approx(0.5, rel=1e-12)
    low, high = _rho_oracle(0.5, math.pi / 4)
    assert low < 1 < high
    assert rho == pytest.approx(high, rel=1e-10)


def test_rho_tends_to_one_for_large_c():
    assert 1 < sp.solve_rho(0.99, 1e-8) < 1 + 1e-3


def test_rho_rejects_bad_inputs():
    with pytest.raises(NoRootAboveOne):
        sp.solve_rho(0.0, 0.3)
    with pytest.raises(ValueError):
        sp.solve_rho(0.5, math.pi / 2)


@settings(max_examples=200, deadline=None)
@given(varrho=st.floats(1e-3, 1 - 1e-3), theta=st.floats(1e-3, math.pi / 2 - 1e-3))
def test_rho_matches_oracle(varrho, theta):
    rho = sp.solve_rho(varrho, theta)
    assert rho > 1
    assert abs(sp.rho_residual(rho, varrho, theta)) <= 1e-10 * max(1.0, varrho / math.tan(theta))
    assert rho == pytest.approx(_rho_oracle(varrho, theta)[1], rel=1e-8)


def test_kappa_interval_example():
    box = sp.SpectralBox(0.2, 0.5, 1.5)
    low, high = sp.kappa_interval(0.3, box)
    s = math.sqrt(0.7)
    assert low == pytest.approx((1 - s) / 0.5)
    assert high == pytest.approx((1 + s) * math.cos(0.2) / 1.5)
    assert low == pytest.approx(0.3267, abs=1e-4)
    assert high == pytest.approx(1.2000, abs=1e-4)


def test_kappa_interval_limits():
    box = sp.SpectralBox(0.3, 0.5, 2.0)
    low, high = sp.kappa_interval(0.0, box)
    assert low == 0.0 and high == pytest.approx(2 / 2.0 * math.cos(0.3))
    with pytest.raises(EmptyInterval):
        sp.kappa_interval(1.0, box)


def test_rho_angle_condition():
    for th in np.linspace(0.01, 1.55, 50):
        ang = sp.rho_angle(th)
        assert math.tan(th) ** 2 <= math.tan(ang) * (1 + 1e-12)
        assert ang < math.pi / 2


# ------------------------------------------------------------- gain selection


def test_select_gamma_ordering_and_containment():
    t = canonical_topology()
    g = sp.select_gamma(t, seed=0, n_samples=500)
    assert g.gamma2 > g.gamma1 > 0
    mus = sp.sampled_nonzero_eigenvalues(t, 500, 123)
    assert sp.gamma_conditions_hold(mus.ravel(), g.gamma1, g.gamma2)


def test_select_gamma_single_edge_contracts():
    t = build_topology(2, 0, [(0, 1, 1.0)], 0.5)
    g = sp.select_gamma(t, seed=0, n_samples=200)
    for L in laplacian_stack(t, sample_weights(t, 50, 4).weights):
        assert sp.spectral_radius_excess(sp.iteration_matrix(L, g)) < 1


def test_reference_gains_pass_on_five_agent_topology():
    t = five_agent_topology()
    for L in laplacian_stack(t, sample_weights(t, 200, 8).weights):
        assert sp.check_gamma_conditions(L, 0.3, 0.75)


def test_equal_gammas_fail():
    assert not sp.gamma_conditions_hold([1.0 + 0j], 0.5, 0.5)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 7))
def test_conditions_imply_contraction(seed, n):
    t = random_topology(np.random.default_rng(seed), n)
    g = sp.select_gamma(t, seed=seed, n_samples=300)
    for L in laplacian_stack(t, sample_weights(t, 10, seed + 1).weights):
        if sp.check_gamma_conditions(L, g.gamma1, g.gamma2):
            assert sp.spectral_radius_excess(sp.iteration_matrix(L, g)) < 1


# ----------------------------------------------------------- boundary curve


def test_boundary_at_zero_angle():
    g1, rho = 0.3, 2.5
    lo, hi = sp.boundary_radii(0.0, g1, rho)
    assert lo == pytest.approx(0.0, abs=1e-15)
    assert hi == pytest.approx(4 / (g1 * (2 * rho - 1)))


def test_boundary_branches_meet():
    rho = 2.5
    th = sp.boundary_angle_limit(rho)
    assert math.tan(th) ** 2 == pytest.approx((rho - 1) ** 2 / (2 * rho - 1))
    assert sp.boundary_discriminant(th, rho) == pytest.approx(0, abs=1e-12)
    assert sp.boundary_discriminant(th + 1e-3, rho) < 0 < sp.boundary_discriminant(th - 1e-3, rho)


def test_boundary_curve_points_are_on_the_quadratic_zero_set():
    g1, rho = 0.3, 2.5
    g2 = rho * g1
    pts = sp.boundary_curve(g1, rho, 181)
    for pt in pts:
        if pt.radius > 1e-9:
            q, _ = sp.gamma_condition_values(pt.z, g1, g2)
            assert abs(q) < 1e-9 * max(1.0, pt.radius**2)


def test_sampled_eigenvalues_inside_reference_curve():
    mus = sp.sampled_nonzero_eigenvalues(five_agent_topology(), 2000, 5)
    assert sp.boundary_margin(mus, 0.3, 0.75) > 0


# ---------------------------------------------------------- iteration matrix


def test_iteration_matrix_forms():
    F = sp.iteration_matrix(np.zeros((3, 3)), 0.3)
    np.testing.assert_array_equal(F.entries, np.eye(3))
    F = sp.iteration_matrix(np.array([[0.0, 0.0], [-2.0, 2.0]]), 0.25)
    np.testing.assert_allclose(F.entries, [[1, 0], [0.5, 0.5]])
    F = sp.iteration_matrix(np.zeros((2, 2)), (0.3, 0.75))
    np.testing.assert_array_equal(F.entries, np.block([[np.eye(2), np.eye(2)], [np.zeros((2, 2)), np.eye(2)]]))
    np.testing.assert_allclose(np.linalg.eigvals(F.entries), 1)


def test_excess_cases():
    t = canonical_topology()
    L = laplacian(t, np.ones(4))
    assert sp.spectral_radius_excess(sp.iteration_matrix(L, 0.3)) < 1
    star = build_topology(4, 0, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0)], 0.5)
    Ls = laplacian(star, np.ones(4))
    eps = 2 / np.diag(Ls).max()
    assert sp.spectral_radius_excess(sp.iteration_matrix(Ls, eps)) >= 1
    F = sp.IterationMatrix(np.eye(1), "first", 0)
    assert sp.spectral_radius_excess(F) == 0.0


def test_excess_qr_matches_lapack():
    t = five_agent_topology()
    for L in laplacian_stack(t, sample_weights(t, 10, 0).weights):
        F = sp.iteration_matrix(L, (0.3, 0.75))
        assert sp.spectral_radius_excess(F) == pytest.approx(sp.spectral_radius_excess(F, "lapack"), rel=1e-9)
