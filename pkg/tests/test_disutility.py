import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lapue.disutility import (MAX, DisutilityField, GbprParams, PenaltyConfig, ScenarioSet,
                              arc_time_derivative, arc_times, gbpr_time, max_penalty,
                              penalty, penalty_deriv)
from lapue.network import build_incidence

from conftest import random_feasible


@pytest.mark.parametrize("v,cap,expected", [
    (2182.0, 1500.0, 16 * (1 + 0.15 * (2182 / 1500) ** 4)),
    (0.0, 1500.0, 16.0),
    (1500.0, 1500.0, 16 * 1.15),
])
def test_gbpr_time(v, cap, expected):
    assert gbpr_time(v, cap, 16.0, 0.15, 4.0) == pytest.approx(expected, rel=1e-15)


def test_gbpr_hand_value():
    assert gbpr_time(2182.0, 1500.0, 16.0, 0.15, 4.0) == pytest.approx(26.7465, abs=5e-5)


@pytest.mark.parametrize("cap", [0.0, -1.0])
def test_gbpr_rejects_nonpositive_capacity(cap):
    with pytest.raises(ValueError):
        gbpr_time(1.0, cap, 1.0, 0.15, 4.0)


def test_arc_time_derivative_fd():
    p = GbprParams([16.0], [0.15], [4.0])
    v, cap, h = 2182.0, 1500.0, 1e-3
    fd = (arc_times(np.array([v + h]), cap, p) - arc_times(np.array([v - h]), cap, p)) / (2 * h)
    assert arc_time_derivative(np.array([v]), cap, p)[0] == pytest.approx(fd[0], rel=1e-6)


@pytest.mark.parametrize("v", [0.0, 10.0, 5000.0])
def test_arc_time_derivative_linear_case(v):
    p = GbprParams([3.0], [0.5], [1.0])
    assert arc_time_derivative(np.array([v]), 200.0, p)[0] == pytest.approx(3.0 * 0.5 / 200.0)


def test_arc_time_derivative_zero_flow():
    p = GbprParams([3.0], [0.15], [4.0])
    assert arc_time_derivative(np.zeros(1), 100.0, p)[0] == 0.0


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_penalty_junctions(t):
    assert penalty(0.0, t) == pytest.approx(t / 4)
    assert penalty(-t, t) == 0.0
    assert penalty(t, t) == pytest.approx(t)
    assert penalty_deriv(t, t) == 1.0
    assert penalty_deriv(-t, t) == 0.0
    for z in (-2 * t, -t / 2, 0.0, t / 2, 2 * t):
        assert 0 <= penalty(z, t) - max(z, 0.0) <= t / 4 + 1e-15


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_penalty_grid_convex_monotone(t):
    z = np.linspace(-3 * t, 3 * t, 10_000)
    h = penalty(z, t)
    d = penalty_deriv(z, t)
    assert np.all(np.diff(h) >= -1e-15)
    assert np.all(np.diff(d) >= -1e-15)           # nondecreasing derivative: convex
    gap = h - np.maximum(z, 0)
    assert gap.min() >= 0 and gap.max() <= t / 4 + 1e-15
    # derivative matches a central difference away from the junctions
    eps = 1e-7 * t
    mask = (np.abs(np.abs(z) - t) > 10 * eps)
    fd = (penalty(z + eps, t) - penalty(z - eps, t)) / (2 * eps)
    np.testing.assert_allclose(fd[mask], d[mask], atol=1e-6)


@pytest.mark.parametrize("t", [0.0, -0.1])
def test_penalty_rejects_bad_t(t):
    with pytest.raises(ValueError):
        penalty(0.0, t)
    with pytest.raises(ValueError):
        PenaltyConfig(theta2=1.0, tau=(1.0,), t=t)


def test_max_penalty():
    np.testing.assert_array_equal(max_penalty([-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])


@given(st.floats(-10, 10), st.floats(1e-3, 5))
def test_penalty_bounds_property(z, t):
    gap = float(penalty(z, t)) - max(z, 0.0)
    assert -1e-14 * max(1.0, abs(z)) <= gap <= t / 4 + 1e-12


def test_free_flow_path_costs(net1_config):
    fld = DisutilityField(net1_config.network, PenaltyConfig())
    c = fld.path_costs(np.zeros(4), np.full(6, 1500.0))
    np.testing.assert_allclose(c, [16.0, 14.0, 12.0, 13.0])


def test_disutility_inactive_penalty(net1_config):
    fld = DisutilityField(net1_config.network, net1_config.penalty)
    caps = np.full(6, 1500.0)
    f = np.array([2182.0, 1318.0, 0.0, 4000.0])
    u = fld.disutility(f, caps)
    c = fld.path_costs(f, caps)
    assert c[0] == pytest.approx(26.7465, abs=5e-5)
    assert u[0] == c[0]                            # C - tau < -t: no lateness charge


def test_disutility_at_tau_boundary(two_route):
    cfg = PenaltyConfig(theta0=0.5, theta1=2.0, theta2=3.0, tau=(1.0,), t=0.1, d=(4.0, 4.0))
    fld = DisutilityField(two_route, cfg)
    u = fld.disutility(np.zeros(2), np.full(2, 10.0))   # C = t0 = (1, 2)
    assert u[0] == pytest.approx(0.5 * 4 + 2.0 * 1.0 + 3.0 * 0.1 / 4)


def test_ue_collapse(net1_config, net1_scenarios):
    cfg = net1_config.penalty.replace(theta2=0.0)
    fld = DisutilityField(net1_config.network, cfg)
    f = np.array([1000.0, 2500.0, 3000.0, 1000.0])
    np.testing.assert_array_equal(fld.saa_disutility(f, net1_scenarios),
                                  fld.path_costs(f, net1_scenarios.capacities).mean(axis=0))


def test_saa_matches_loop_oracle(net1_config, net1_scenarios):
    net = net1_config.network
    cfg = net1_config.penalty.replace(tau=(20.0, 17.0), t=0.5)
    fld = DisutilityField(net, cfg)
    rng = np.random.default_rng(1)
    inc = build_incidence(net)
    sc = ScenarioSet(net1_scenarios.capacities[:50])
    for _ in range(5):
        f = random_feasible(net, inc, rng)
        loop_u = sum(fld.disutility(f, xi) for xi in sc.capacities) / sc.size
        loop_j = sum(fld.jacobian(f, xi) for xi in sc.capacities) / sc.size
        np.testing.assert_allclose(fld.saa_disutility(f, sc), loop_u, rtol=1e-12)
        np.testing.assert_allclose(fld.saa_jacobian(f, sc), loop_j, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("m", [1, 7])
def test_saa_identical_rows(net1_config, m):
    fld = DisutilityField(net1_config.network, net1_config.penalty)
    xi = np.array([1500, 1500, 3600, 3600, 1500, 1500.0])
    f = np.array([1750.0, 1750.0, 2000.0, 2000.0])
    sc = ScenarioSet(np.tile(xi, (m, 1)))
    np.testing.assert_allclose(fld.saa_disutility(f, sc), fld.disutility(f, xi), rtol=1e-14)


def test_saa_affine_in_measure(net1_config, net1_scenarios):
    fld = DisutilityField(net1_config.network, net1_config.penalty.replace(tau=(20.0, 17.0)))
    a = ScenarioSet(net1_scenarios.capacities[:300])
    b = ScenarioSet(net1_scenarios.capacities[300:1000])
    f = np.array([1500.0, 2000.0, 2200.0, 1800.0])
    pooled = fld.saa_disutility(f, a.concat(b))
    mixed = (300 * fld.saa_disutility(f, a) + 700 * fld.saa_disutility(f, b)) / 1000
    np.testing.assert_allclose(pooled, mixed, rtol=1e-12)


def test_weighted_mixture(net1_config, net1_scenarios):
    fld = DisutilityField(net1_config.network, net1_config.penalty)
    f = np.array([1500.0, 2000.0, 2200.0, 1800.0])
    xi = net1_scenarios.mean_capacity()
    xi[0] = 1470.0
    eps = 0.25
    got = fld.saa_disutility(f, net1_scenarios.mixed_with(xi, eps))
    want = (1 - eps) * fld.saa_disutility(f, net1_scenarios) + eps * fld.disutility(f, xi)
    np.testing.assert_allclose(got, want, rtol=1e-13)


@pytest.mark.parametrize("caps,weights", [
    (np.zeros((0, 2)), None),
    (np.array([[1.0, -1.0]]), None),
    (np.ones((2, 2)), np.array([0.3, 0.3])),
])
def test_scenario_set_validation(caps, weights):
    with pytest.raises(ValueError):
        ScenarioSet(caps, weights=weights)


def test_jacobian_ue_symmetric_psd(net1_config):
    fld = DisutilityField(net1_config.network, net1_config.penalty.replace(theta2=0.0))
    J = fld.jacobian(np.array([1500.0, 2000.0, 2200.0, 1800.0]), np.full(6, 1500.0))
    np.testing.assert_allclose(J, J.T, rtol=1e-14)
    assert np.linalg.eigvalsh(J).min() >= -1e-12


def test_jacobian_no_lateness_equals_ue(net1_config):
    f = np.array([1500.0, 2000.0, 2200.0, 1800.0])
    caps = np.array([1500, 1500, 3600, 3600, 1500, 1500.0])
    a = DisutilityField(net1_config.network, net1_config.penalty).jacobian(f, caps)
    b = DisutilityField(net1_config.network, net1_config.penalty.replace(theta2=0.0)).jacobian(f, caps)
    np.testing.assert_array_equal(a, b)


def test_max_mode_lower_selection(two_route):
    cfg = PenaltyConfig(theta1=1.0, theta2=2.0, tau=(1.0,), mode=MAX)
    fld = DisutilityField(two_route, cfg)
    b = fld.coefficients(np.zeros(2), np.full(2, 10.0))     # C = (1, 2): kink, then late
    np.testing.assert_array_equal(b, [1.0, 3.0])


def fd_jacobian(fn, f, h):
    cols = []
    for j in range(f.size):
        e = np.zeros_like(f)
        e[j] = h
        cols.append((fn(f + e) - fn(f - e)) / (2 * h))
    return np.column_stack(cols)


def near_kink(fld, f, sc, h, cfg):
    # any scenario whose lateness argument crosses +-t inside the finite-difference stencil
    c = fld.path_costs(f, sc.capacities) - fld.tau_path
    slope = np.abs(fld.saa_jacobian(f, sc)).sum(axis=1).max() * 10
    band = 1e-6 + slope * h
    return bool(np.any(np.abs(np.abs(c) - cfg.t) < band))


@pytest.mark.parametrize("tau,t", [((27.0, 22.0), 0.01), ((20.0, 17.0), 1.0), ((25.0, 20.0), 5.0)])
def test_saa_jacobian_fd(net1_config, net1_scenarios, tau, t):
    net = net1_config.network
    cfg = net1_config.penalty.replace(tau=tau, t=t)
    fld = DisutilityField(net, cfg)
    sc = ScenarioSet(net1_scenarios.capacities[:20])
    rng = np.random.default_rng(7)
    inc = build_incidence(net)
    checked = 0
    for _ in range(40):
        f = random_feasible(net, inc, rng)
        h = 1e-3
        if near_kink(fld, f, sc, h, cfg):
            continue
        J = fld.saa_jacobian(f, sc)
        fd = fd_jacobian(lambda x: fld.saa_disutility(x, sc), f, h)
        assert np.max(np.abs(J - fd)) <= 1e-5 * np.max(np.abs(J))
        checked += 1
    assert checked >= 20


def test_monotone_operator_network1(net1_config, net1_scenarios):
    net = net1_config.network
    fld = DisutilityField(net, net1_config.penalty)
    inc = build_incidence(net)
    rng = np.random.default_rng(3)
    for _ in range(100):
        f1, f2 = random_feasible(net, inc, rng), random_feasible(net, inc, rng)
        d = (fld.saa_disutility(f1, net1_scenarios) - fld.saa_disutility(f2, net1_scenarios)) @ (f1 - f2)
        assert d >= -1e-9
