import math

import numpy as np
import pytest

from ficic import oracle
from ficic.channel import NarrowbandScenario
from ficic.multi import feasibility_power, solve_sum_rate
from ficic.single import PropOneConstants, beta_star
from ficic.suite import probe_targets, random_dual_draw, random_scenario, random_wideband, run_oracle_suite
from ficic.wideband import WidebandObjective


def test_report_fields():
    r = oracle.make_report("x", "abc", 1.0, 1.0 + 1e-9, 1e-6, 10)
    assert r.passed and r.pass_ and r.budget_used == 10
    assert "PASS" in r.line()
    r = oracle.make_report("x", "abc", 1.0, 2.0, 1e-6, 10, one_sided=True)
    assert not r.passed
    # one-sided: a primary above the oracle is fine
    assert oracle.make_report("x", "abc", 2.0, 1.0, 1e-6, 10, one_sided=True).passed


def test_digest_is_content_based():
    a = np.arange(4.0)
    assert oracle.digest(a) == oracle.digest(a.copy())
    assert oracle.digest(a) != oracle.digest(a + 1)


def test_grid_search_examples():
    b, f = oracle.grid_search_beta((1.0, 2.0, 2.0, 2.0), 1_000_000)
    assert b == pytest.approx(0.17712, abs=1e-5)
    assert f == pytest.approx(0.54858, abs=1e-5)
    # c = 0: the objective peaks at beta = 0, a/(b(a+d)) lies inside the scanned range
    a, bb, d = 1.0, 2.0, 1.0
    b0, f0 = oracle.grid_search_beta((a, bb, 0.0, d), 10_000)
    assert b0 == 0.0 and f0 == pytest.approx(a / d)
    assert a / (bb * (a + d)) <= 2.0 * a / (bb * (a + d))


def test_grid_never_beats_closed_form(rng):
    from ficic.single import ficic_optimal
    for _ in range(30):
        s = random_scenario(rng)
        _, g = oracle.grid_search_beta(s, 10_000)
        assert g <= ficic_optimal(s).sinr[0] * (1 + 1e-6)


def test_root_bracket(rng):
    for _ in range(50):
        consts = oracle.noiseless_constants(random_scenario(rng))
        g0, gu, nu, upper = oracle.root_bracket(consts, beta_star(PropOneConstants(*consts)))
        assert g0 > 0 and gu < 0 and 0 < nu < upper


def test_kkt_on_solver_output(rng):
    for i in range(10):
        s = random_scenario(rng, k_p=2 + i % 2)
        rep = solve_sum_rate(s)
        sol = rep.solution
        res = oracle.kkt_residuals(s, sol.duals, probe_targets(rep), sol.w_f, sol.w_d)
        assert res.fixed_point <= 1e-10
        assert res.forwarding <= 1e-8 and res.desired <= 1e-8
        assert abs(res.duality_gap) <= 1e-6


def test_kkt_perturbation_grows(rng):
    s = random_scenario(rng, k_p=2)
    rep = solve_sum_rate(s)
    sol = rep.solution
    gamma = probe_targets(rep)
    base = oracle.kkt_residuals(s, sol.duals, gamma, sol.w_f, sol.w_d).forwarding
    d = rng.standard_normal(sol.w_f.shape) + 1j * rng.standard_normal(sol.w_f.shape)
    w = sol.w_f + 1e-3 * np.linalg.norm(sol.w_f) * d / np.linalg.norm(d)
    bumped = oracle.kkt_residuals(s, sol.duals, gamma, w, sol.w_d).forwarding
    assert bumped >= 10 * max(base, 1e-12)


def test_kkt_zero_targets(rng):
    s = random_scenario(rng, k_p=2)
    _, sol = feasibility_power(s, [0.0, 0.0])
    res = oracle.kkt_residuals(s, sol.duals, [1.0, 1.0], sol.w_f, sol.w_d)
    assert res.fixed_point == 0.0 or sol.duals.sum() == 0
    assert res.forwarding == 0.0 and res.desired == 0.0


def test_pout_no_forwarding(rng):
    s = random_scenario(rng, k_p=2)
    w_d = rng.standard_normal((2, s.n_t)) + 1j * rng.standard_normal((2, s.n_t))
    est = oracle.signal_level_pout(s, np.zeros((s.n_t, s.n_r)), w_d, 20_000, rng)
    assert est.estimate == pytest.approx(np.sum(np.abs(w_d) ** 2), rel=0.02)


def test_pout_matches_closed_form(rng):
    s = random_scenario(rng).replace(sigma_i2=0.0)
    s = s.replace(sigma_i2=0.05 * s.p0)
    w_f = rng.standard_normal((s.n_t, s.n_r)) + 1j * rng.standard_normal((s.n_t, s.n_r))
    w_f *= math.sqrt(0.5 / 0.05) / np.linalg.norm(w_f)        # loop gain 0.5
    w_d = 0.3 * np.ones((1, s.n_t))
    est = oracle.signal_level_pout(s, w_f, w_d, 100_000, rng)
    assert est.estimate == pytest.approx(oracle.closed_form_pout(s, w_f, w_d), rel=0.02)


def test_pout_with_hardware_components(rng):
    s = NarrowbandScenario(np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 2)), 1e-2, 0.02, 1.0)
    w_f = np.full((2, 2), 1.0, dtype=complex)                 # loop gain 0.08
    w_d = np.ones((1, 2))
    est = oracle.signal_level_pout(s, w_f, w_d, 100_000, rng, mu_x=2e-3, mu_y=3e-3)
    assert est.estimate == pytest.approx(oracle.closed_form_pout(s, w_f, w_d), rel=0.02)


def test_pout_diverges_past_bound(rng):
    s = NarrowbandScenario(np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 2)), 1e-2, 0.1, 1.0)
    w_f = np.full((2, 2), math.sqrt(1.5 / 4 / 0.1), dtype=complex)
    est = oracle.signal_level_pout(s, w_f, np.zeros((1, 2)), 100_000, rng)
    assert est.diverged and est.trace[-1] > 100 * est.trace[0]


def test_finite_difference_quadratic():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    fun = lambda x: 0.5 * x @ a @ x + x[0]  # noqa: E731
    x = np.array([0.3, -1.2])
    _, g = oracle.finite_diff_gradient(fun, x, 1e-4)
    np.testing.assert_allclose(g, a @ x + np.array([1.0, 0.0]), atol=1e-9)


def test_zero_tap_power_gradient(rng):
    ws = random_wideband(rng)
    obj = WidebandObjective(ws, 2)
    u = rng.uniform(0.2, 1.0, ws.n) / ws.n
    theta = np.concatenate([np.zeros(2 * obj.n_taps), u])
    q = ws.p0 * u
    slopes = np.sum(np.abs(ws.g_pk) ** 2, axis=1) / (np.abs(ws.gbar_mk) ** 2 + ws.sigma_n2)
    expected = ws.p0 * slopes / (math.log(2) * (1 + q * slopes))
    np.testing.assert_allclose(obj.gradient(theta)[2 * obj.n_taps:], expected, rtol=1e-9)


def test_water_filling_examples():
    q, r = oracle.water_filling([1.0, 1.0], 2.0)
    np.testing.assert_allclose(q, [1.0, 1.0])
    assert r == pytest.approx(2.0)
    q, _ = oracle.water_filling([10.0, 0.01], 1.0)
    np.testing.assert_allclose(q, [1.0, 0.0])
    with pytest.raises(ValueError):
        oracle.water_filling([1.0], 0.0)


def test_prop2_agreement(rng):
    from ficic.multi import prop2_predicates
    for _ in range(300):
        h, lam, gamma = random_dual_draw(rng)
        a, b = prop2_predicates(h, lam, gamma, 1e-10)
        assert a == b


def test_quick_suite_passes():
    reports = run_oracle_suite(seed=1, quick=True)
    assert len(reports) == 16
    failed = [r.line() for r in reports if not r.passed]
    assert not failed, failed
