import math

import numpy as np
import pytest

from conftest import scalar_scenario
from ficic import oracle
from ficic.errors import BranchError, OscillationError
from ficic.single import (FicicSolution, PropOneConstants, asymptotics, beta_star, closed_form_sinr, ficic_optimal,
                          forward_power, forward_power_asymptotic, hd_optimal, hd_sinr, p_out_single,
                          prop1_constants, sinr_eval_single, strong_ici_sinr, weak_ici_sinr)
from ficic.suite import random_scenario


def test_hd_examples():
    s = scalar_scenario(h=(1.0, 0.0), sigma_n2=1.0)
    assert hd_optimal(s).sinr[0] == pytest.approx(1.0)
    s = scalar_scenario(p0=2.0, h=(1.0, 1.0), hbar_m=1.0, sigma_n2=1.0)
    sol = hd_optimal(s)
    assert sol.sinr[0] == pytest.approx(2.0)
    assert sol.p_out == pytest.approx(2.0)
    assert np.all(sol.w_f == 0)


def test_hd_mrt_beats_random_precoders(rng):
    s = random_scenario(rng)
    best = hd_sinr(s)
    w = rng.standard_normal((10_000, s.n_t)) + 1j * rng.standard_normal((10_000, s.n_t))
    w *= math.sqrt(s.p0) / np.linalg.norm(w, axis=1, keepdims=True)
    sig = np.abs(w @ s.h.conj()) ** 2
    assert np.max(sig / (abs(s.hbar_mk) ** 2 + s.sigma_n2)) <= best * (1 + 1e-12)


def test_constants_example():
    s = scalar_scenario(hbar_m=1.0)
    k = prop1_constants(s)
    assert (k.a, k.b, k.c, k.d) == pytest.approx((1.0, 2.0, 2.0, 2.0))
    assert prop1_constants(scalar_scenario(hbar_m=0.0)).c == 0.0


def test_beta_star_examples():
    assert beta_star(PropOneConstants(1.0, 2.0, 2.0, 2.0)) == pytest.approx((3 - math.sqrt(7)) / 2, rel=1e-12)
    assert beta_star(PropOneConstants(1.0, 2.0, 0.0, 1.0)) == pytest.approx(0.25)
    b, _ = oracle.grid_search_beta((1.0, 2.0, 2.0, 2.0), 1_000_000)
    assert b == pytest.approx(beta_star(PropOneConstants(1.0, 2.0, 2.0, 2.0)), abs=1e-5)


def test_closed_form_example():
    s = scalar_scenario(hbar_m=1.0)
    sol = ficic_optimal(s)
    beta = (3 - math.sqrt(7)) / 2
    assert sol.sinr[0] == pytest.approx(1.0 / (1.0 / (2 * beta) - 1.0), rel=1e-9)
    assert sol.sinr[0] == pytest.approx(0.54858, abs=1e-5)


def test_stationarity_residual(rng):
    for _ in range(50):
        k = prop1_constants(random_scenario(rng))
        nu = 0.5 * k.c * beta_star(k)
        g = oracle.stationarity_quadratic(k.a, k.b, k.c, k.d, nu)
        assert abs(g) <= 1e-9 * max(k.b * k.c, k.b * (k.a + k.d) * nu)


def test_ici_free_reduces_to_hd():
    s = scalar_scenario(p0=1.0, h=(1.0, 0.5), hbar_m=0.0, hbar_mp=(0.3, 0.2), sigma_n2=0.1)
    sol = ficic_optimal(s)
    assert np.all(sol.w_f == 0)
    assert sol.sinr[0] == pytest.approx(1.25 / 0.1, rel=1e-12)


def test_solution_invariants(rng):
    for _ in range(200):
        s = random_scenario(rng)
        sol = ficic_optimal(s)
        assert sol.sinr[0] >= hd_sinr(s) - 1e-12
        assert s.sigma_e2 * sol.loop_gain < 1
        assert sol.p_out == pytest.approx(s.p0, rel=1e-9)
        sv = np.linalg.svd(sol.w_f, compute_uv=False)
        if sv[0] > 0:
            assert len(sv) == 1 or sv[1] <= 1e-9 * sv[0]


def test_phase_invariance(rng):
    s = random_scenario(rng)
    ref = ficic_optimal(s)
    for phi in (0.3, -2.0, math.pi):
        other = ficic_optimal(s.replace(phi=phi))
        assert other.sinr[0] == pytest.approx(ref.sinr[0], rel=1e-12)
        # re-phasing the old filter to the new phase gives the same SINR
        rotated = FicicSolution(ref.w_f * np.exp(1j * (phi - s.phi)), ref.w_d, 0.0, np.zeros(1))
        assert sinr_eval_single(s.replace(phi=phi), rotated) == pytest.approx(ref.sinr[0], rel=1e-9)


def test_monotone_in_self_interference(rng):
    s = random_scenario(rng)
    ladder = [ficic_optimal(s.replace(sigma_i2=s.p0 * 10.0 ** (-e))).sinr[0] for e in range(12, 2, -1)]
    assert all(x >= y - 1e-12 * x for x, y in zip(ladder, ladder[1:]))


def test_evaluator_oscillation():
    s = scalar_scenario(sigma_i2=0.5)
    w_f = np.array([[math.sqrt(2.0)]], dtype=complex)
    with pytest.raises(OscillationError):
        p_out_single(s, w_f, np.zeros(1))


def test_weak_ici_limit():
    s = scalar_scenario(p0=1.0, h=(1.0, 0.0), hbar_m=0.5, hbar_mp=(1.0,), sigma_n2=1e-6 * 0.25)
    assert ficic_optimal(s).sinr[0] == pytest.approx(weak_ici_sinr(s), rel=1e-2)
    with pytest.raises(BranchError):
        strong_ici_sinr(s)


def test_very_strong_ici_limit():
    s = scalar_scenario(p0=1.0, h=(1.0,), hbar_m=10.0, hbar_mp=(1.0,), sigma_n2=1e-9)
    ratio = ficic_optimal(s).sinr[0] / hd_sinr(s)
    assert 1.0 <= ratio <= 1.05
    with pytest.raises(BranchError):
        weak_ici_sinr(s)


def test_self_interference_limited_regime():
    s = scalar_scenario(p0=1.0, h=(1.0,), hbar_m=0.5, hbar_mp=(1.0,), sigma_n2=1e-2, sigma_i2=1e6)
    sol = ficic_optimal(s)
    assert abs(sol.sinr[0] - hd_sinr(s)) / hd_sinr(s) <= 1e-3
    assert forward_power_asymptotic(s) < 1e-6
    assert forward_power(s, sol) < 1e-3


def test_asymptotic_report_branches():
    weak = asymptotics(scalar_scenario(hbar_m=0.1))
    assert weak.weak_ici_sinr is not None and weak.strong_ici_sinr is None
    strong = asymptotics(scalar_scenario(hbar_m=3.0))
    assert strong.strong_ici_sinr is not None and strong.weak_ici_sinr is None


def test_closed_form_sinr_with_beta():
    k = PropOneConstants(1.0, 2.0, 2.0, 2.0)
    b = beta_star(k)
    assert closed_form_sinr(k, b) == pytest.approx(closed_form_sinr(k))
    assert float(k.f0(b)) == pytest.approx(closed_form_sinr(k), rel=1e-12)
