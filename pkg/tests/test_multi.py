import math

import numpy as np
import pytest

from conftest import scalar_scenario
from ficic.channel import NarrowbandScenario
from ficic.errors import InfeasibleTarget, OscillationError
from ficic.multi import (BISECTION_EPS, FairnessSpec, feasibility_power, fixed_point_lambdas, p_out_multi,
                         power_allocation, prop2_predicates, sinr_eval_multi, solve_sum_rate, wd_directions,
                         wf_from_duals)
from ficic.single import FicicSolution, closed_form_sinr, hd_sinr, prop1_constants
from ficic.suite import probe_targets, random_scenario


def two_user(rng, orth=False):
    h = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    if orth:
        h = np.array([[1.0, 0, 0], [0, 2.0, 0]], dtype=complex)
    hbar_m = rng.standard_normal((2, 1)) + 1j * rng.standard_normal((2, 1))
    hbar_mp = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
    return NarrowbandScenario(h, hbar_m, hbar_mp, 0.1, 1e-4, 1.0, 0.4)


def sol_of(w_f, w_d):
    return FicicSolution(np.asarray(w_f, dtype=complex), np.atleast_2d(w_d), 0.0, np.zeros(1))


def test_fairness_spec():
    assert FairnessSpec.equal(3).as_array() == pytest.approx([1 / 3] * 3)
    with pytest.raises(ValueError):
        FairnessSpec((0.5, 0.6))
    with pytest.raises(ValueError):
        FairnessSpec((1.5, -0.5))


def test_p_out_examples():
    s = two_user(np.random.default_rng(0))
    w_d = np.array([[math.sqrt(0.4), 0, 0], [0, math.sqrt(0.6), 0]])
    assert p_out_multi(s, sol_of(np.zeros((3, 2)), w_d)) == pytest.approx(1.0)
    bad = s.replace(sigma_i2=1.0)                           # sigma_e2 = 1
    w_f = np.zeros((3, 2))
    w_f[0, 0] = 1.0
    with pytest.raises(OscillationError):
        p_out_multi(bad, sol_of(w_f, w_d))


def test_multi_evaluator_reduces_to_hd():
    s = random_scenario(np.random.default_rng(1))
    h = s.h
    w_d = math.sqrt(s.p0) * h / np.linalg.norm(h)
    got = sinr_eval_multi(s, sol_of(np.zeros((s.n_t, s.n_r)), w_d))
    assert got[0] == pytest.approx(hd_sinr(s), rel=1e-12)


def test_orthogonal_users_no_intra_interference():
    s = two_user(np.random.default_rng(2), orth=True).replace(hbar_m=np.zeros((2, 1)))
    w_d = s.h_p.copy()
    sinr = sinr_eval_multi(s, sol_of(np.zeros((3, 2)), w_d))
    expected = np.linalg.norm(s.h_p, axis=1) ** 4 / s.sigma_n2
    np.testing.assert_allclose(sinr, expected, rtol=1e-12)


def test_multi_evaluator_independent_path(rng):
    s = random_scenario(rng, k_p=3)
    w_f = 1e-3 * (rng.standard_normal((s.n_t, s.n_r)) + 1j * rng.standard_normal((s.n_t, s.n_r)))
    w_d = rng.standard_normal((3, s.n_t)) + 1j * rng.standard_normal((3, s.n_t))
    w_d *= 0.1 * math.sqrt(s.p0)
    got = sinr_eval_multi(s, sol_of(w_f, w_d))
    p = p_out_multi(s, sol_of(w_f, w_d))
    for k in range(3):
        hk = s.h_p[k]
        total = 0.0
        for j in range(3):
            if j != k:
                total += abs(np.sum(hk.conj() * w_d[j])) ** 2
        resid = 0.0
        for i in range(s.k_m):
            v = np.conj(s.hbar_m[k, i]) + np.exp(-1j * s.phi) * np.sum((hk.conj() @ w_f) * s.hbar_mp[i].conj())
            resid += abs(v) ** 2
        f = np.sum(np.abs(w_f.T @ hk.conj()) ** 2)
        sig = abs(np.sum(hk.conj() * w_d[k])) ** 2
        ref = sig / (total + resid + f * (p * s.sigma_e2 + s.sigma_n2) + s.sigma_n2)
        assert got[k] == pytest.approx(ref, rel=1e-12)


def test_fixed_point_examples():
    st = fixed_point_lambdas(np.array([[1.0, 1.0]]), [3.0])
    assert st.lam[0] == pytest.approx(1.5)
    h = np.array([[1.0, 0.0], [0.0, 2.0]])
    st = fixed_point_lambdas(h, [1.0, 2.0])
    np.testing.assert_allclose(st.lam, [1.0, 0.5])


def test_fixed_point_uniqueness(rng):
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    gamma = np.array([0.5, 2.0, 1.0])
    a = fixed_point_lambdas(h, gamma).lam
    b = fixed_point_lambdas(h, gamma, lam0=10.0 * np.ones(3)).lam
    np.testing.assert_allclose(a, b, rtol=1e-8)
    for k in range(3):
        m = np.eye(4) + sum(a[j] * np.outer(h[j], h[j].conj()) for j in range(3) if j != k)
        q = np.real(h[k].conj() @ np.linalg.solve(m, h[k]))
        assert abs(a[k] - gamma[k] / q) <= 1e-10 * max(a[k], 1)


def test_fixed_point_rejects_bad_input():
    with pytest.raises(ValueError):
        fixed_point_lambdas(np.ones((1, 2)), [-1.0])
    with pytest.raises(ValueError):
        fixed_point_lambdas(np.zeros((1, 2)), [1.0])


def test_wf_examples(rng):
    s = two_user(rng)
    assert np.all(wf_from_duals(s, [0.0, 0.0]) == 0)
    assert np.all(wf_from_duals(s.replace(hbar_m=np.zeros((2, 1))), [1.0, 2.0]) == 0)
    wf_from_duals(s, [0.7, 0.2])        # stationarity is checked internally


def test_wd_directions(rng):
    h = rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3))
    np.testing.assert_allclose(wd_directions(h, [2.0])[0], h[0])
    h2 = np.array([[1.0, 0, 0], [0, 1.0, 0]], dtype=complex)
    np.testing.assert_allclose(wd_directions(h2, [1.0, 3.0]), h2)
    h = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    leak = []
    for lam1 in (0.0, 0.1, 1.0, 10.0, 100.0):
        w = wd_directions(h, [0.5, lam1])[0]
        leak.append(abs(h[1].conj() @ w) / np.linalg.norm(w))
    assert all(x > y for x, y in zip(leak, leak[1:]))


def test_power_allocation(rng):
    s = random_scenario(rng)
    gamma = np.array([3.0])
    w_t = s.h_p.copy()
    p = power_allocation(s, gamma, np.zeros((s.n_t, s.n_r)), w_t)
    zeta = abs(s.hbar_mk) ** 2 + s.sigma_n2
    assert p[0] == pytest.approx(gamma[0] * zeta / np.linalg.norm(s.h) ** 4, rel=1e-12)
    assert np.all(power_allocation(s, [0.0], np.zeros((s.n_t, s.n_r)), w_t) == 0)


def test_power_allocation_hits_targets(rng):
    s = random_scenario(rng, k_p=2)
    gamma = np.array([0.3, 0.8])
    obj, sol = feasibility_power(s, gamma)
    np.testing.assert_allclose(sinr_eval_multi(s, sol, s.p0), gamma, rtol=1e-8)


def test_power_allocation_infeasible():
    s = NarrowbandScenario(np.array([[1.0, 0], [1.0, 1e-9]]), np.zeros((2, 1)), np.ones((1, 1)), 1.0, 0.0, 1.0)
    with pytest.raises(InfeasibleTarget):
        power_allocation(s, [1e3, 1e3], np.zeros((2, 1)), s.h_p)


def test_feasibility_examples(rng):
    s = random_scenario(rng)
    obj, sol = feasibility_power(s, [0.0])
    assert obj == 0.0 and np.all(sol.w_d == 0)
    target = closed_form_sinr(prop1_constants(s))
    obj, _ = feasibility_power(s, [target])
    assert obj == pytest.approx(s.p0, rel=1e-6)


def test_feasibility_monotone(rng):
    s = random_scenario(rng, k_p=2)
    objs = [feasibility_power(s, [g, 0.5])[0] for g in (0.1, 0.2, 0.4, 0.8, 1.6)]
    assert all(a <= b for a, b in zip(objs, objs[1:]))


def test_sum_rate_single_user(rng):
    for _ in range(20):
        s = random_scenario(rng)
        rep = solve_sum_rate(s)
        ref = math.log2(1 + closed_form_sinr(prop1_constants(s)))
        assert abs(rep.r_sum - ref) <= BISECTION_EPS + 1e-6
        assert rep.upper - rep.lower <= BISECTION_EPS


def test_sum_rate_ici_free_hd():
    s = scalar_scenario(p0=1.0, h=(1.0, 1.0), hbar_m=0.0, hbar_mp=(0.5,), sigma_n2=0.2)
    rep = solve_sum_rate(s, hd=True)
    assert rep.r_sum == pytest.approx(math.log2(1 + 2.0 / 0.2), abs=BISECTION_EPS + 1e-9)


def test_degenerate_fairness(rng):
    s = random_scenario(rng, k_p=2)
    rep = solve_sum_rate(s, FairnessSpec((1.0, 0.0)))
    assert rep.rates[1] == 0.0
    assert rep.solution.w_d[1] == pytest.approx(np.zeros(s.n_t))


def test_bisection_invariants(rng):
    for i in range(10):
        s = random_scenario(rng, k_p=2 + i % 2)
        rep = solve_sum_rate(s)
        assert rep.upper - rep.lower <= BISECTION_EPS
        assert rep.objective <= s.p0 * (1 + 1e-12)
        gamma = probe_targets(rep)
        np.testing.assert_allclose(rep.sinr, gamma, rtol=1e-6)
        shares = rep.rates / rep.r_sum
        np.testing.assert_allclose(shares, 1.0 / s.k_p, atol=1e-6)
        hd = solve_sum_rate(s, hd=True)
        assert hd.r_sum <= rep.r_sum + BISECTION_EPS
        # the bracket's upper end is infeasible: either the solve fails or it needs more than P0
        alpha = np.full(s.k_p, 1.0 / s.k_p)
        try:
            obj, _ = feasibility_power(s, np.expm1(alpha * (rep.upper + BISECTION_EPS) * math.log(2)))
            assert obj > s.p0
        except InfeasibleTarget:
            pass


def test_prop2_examples():
    h = np.array([[1.0, 1.0]])
    assert prop2_predicates(h, [0.0], [2.0]) == (True, True)
    # |h|^2 = 2, boundary at gamma / |h|^2 = 1
    assert prop2_predicates(h, [1.001], [2.0]) == (False, False)
    assert prop2_predicates(h, [0.999], [2.0]) == (True, True)
