"""Acceptance criteria at full budget.

Each test prints one ``CRITERION n: PASS|FAIL ...`` line; the lines are also
collected and repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

import fuzz_configs
from conftest import record_criterion
from ficic import oracle as orc
from ficic.channel import GeometryConfig
from ficic.harness import SweepConfig, run_sweep
from ficic.multi import BISECTION_EPS, prop2_predicates, solve_sum_rate
from ficic.single import PropOneConstants, beta_star, closed_form_sinr, ficic_optimal, prop1_constants
from ficic.suite import probe_targets, random_dual_draw, random_scenario, random_wideband
from ficic.wideband import WidebandConfig, WidebandObjective, WidebandScenario, optimize_wideband

pytestmark = pytest.mark.slow

SINGLE = GeometryConfig(k_m=1, k_p=1, n_r=1, snr_edge_db=20.0)


def _check(n, ok, detail):
    record_criterion(n, ok, detail)
    assert ok, detail


def _scenarios(seed, count, **kw):
    rng = np.random.default_rng(seed)
    return [random_scenario(rng, **kw) for _ in range(count)]


@pytest.fixture(scope="module")
def single_scenarios():
    return _scenarios(101, 1000)


def test_criterion_01_closed_form_optimality(single_scenarios):
    t0 = time.perf_counter()
    worst = 0.0
    for s in single_scenarios:
        primary = float(ficic_optimal(s).sinr[0])
        _, grid = orc.grid_search_beta(s, 100_000)
        worst = max(worst, (grid - primary) / primary)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed <= 60.0
    _check(1, ok, f"worst grid excess {worst:.2e} (tol 1e-6) over 1000 scenarios in {elapsed:.1f} s (limit 60 s)")


def test_criterion_02_root_bracketing(single_scenarios):
    good = 0
    for s in single_scenarios:
        consts = orc.noiseless_constants(s)
        g0, gu, nu, upper = orc.root_bracket(consts, beta_star(PropOneConstants(*consts)))
        good += int(g0 > 0 and gu < 0 and 0 < nu < upper)
    _check(2, good == len(single_scenarios), f"{good}/{len(single_scenarios)} brackets with interior root")


def test_criterion_03_single_multi_consistency():
    worst = 0.0
    for s in _scenarios(303, 500, k_p=1):
        ref = math.log2(1.0 + closed_form_sinr(prop1_constants(s)))
        worst = max(worst, abs(solve_sum_rate(s, eps=BISECTION_EPS).r_sum - ref))
    tol = BISECTION_EPS + 1e-6
    _check(3, worst <= tol, f"worst |r_sum - closed form| {worst:.2e} b/s/Hz (tol {tol:.2e}) over 500 scenarios")


def test_criterion_04_kkt_and_duality():
    rng = np.random.default_rng(404)
    worst = np.zeros(5)
    solved = 0
    for i in range(500):
        s = random_scenario(rng, k_p=2 + i % 2)
        rep = solve_sum_rate(s)
        if rep.r_sum <= 0:
            continue
        solved += 1
        gamma = probe_targets(rep)
        sol = rep.solution
        res = orc.kkt_residuals(s, sol.duals, gamma, sol.w_f, sol.w_d)
        hit = float(np.max(np.abs(rep.sinr / gamma - 1.0)))
        worst = np.maximum(worst, [res.fixed_point, res.forwarding, res.desired, abs(res.duality_gap), hit])
    tols = np.array([1e-10, 1e-8, 1e-8, 1e-6, 1e-6])
    ok = bool(np.all(worst <= tols)) and solved > 0
    detail = (f"{solved}/500 with positive rate; fixed point {worst[0]:.1e}, forwarding {worst[1]:.1e}, "
              f"desired {worst[2]:.1e}, duality gap {worst[3]:.1e}, SINR hit {worst[4]:.1e}")
    _check(4, ok, detail)


def test_criterion_05_prop2_equivalence():
    rng = np.random.default_rng(505)
    agree = 0
    for _ in range(1000):
        h, lam, gamma = random_dual_draw(rng)
        a, b = prop2_predicates(h, lam, gamma, 1e-10)
        agree += int(a == b)
    _check(5, agree == 1000, f"{agree}/1000 draws where the two predicates agree")


def test_criterion_06_signal_level_power():
    rng = np.random.default_rng(606)
    worst, done = 0.0, 0
    while done < 20:
        s = random_scenario(rng, k_p=int(rng.integers(1, 3)))
        rep = solve_sum_rate(s)
        if rep.r_sum <= 0:
            continue
        sol = rep.solution
        est = orc.signal_level_pout(s, sol.w_f, sol.w_d, 100_000, rng)
        ref = orc.closed_form_pout(s, sol.w_f, sol.w_d)
        worst = max(worst, abs(est.estimate - ref) / ref)
        done += 1
    # loop gain sigma_e2 * ||W_f||_F^2 = 1.5 breaks the stability condition
    s = random_scenario(rng).replace(sigma_i2=0.0)
    s = s.replace(sigma_i2=s.p0 * 0.1)
    w_f = np.full((s.n_t, s.n_r), math.sqrt(1.5 / (s.n_t * s.n_r)) / math.sqrt(0.1), dtype=complex)
    div = orc.signal_level_pout(s, w_f, np.zeros((1, s.n_t)), 100_000, rng)
    ok = worst <= 0.02 and div.diverged
    _check(6, ok, f"worst relative P_out error {100 * worst:.2f}% (tol 2%) over 20 instances; "
                  f"unstable instance diverged={div.diverged}")


def test_criterion_07_fd_dominance():
    cfg = SweepConfig(geometry=SINGLE, values=(20.0,), schemes=("FD_FICIC", "HD"), trials=1000, seed=7)
    res = run_sweep(cfg)
    free = run_sweep(cfg.replace(geometry=SINGLE.replace(ici_scale=0.0), schemes=("HD",)))
    fd = [res.mean("FD_FICIC", c, 20.0) for c in (0, 1)]
    hd = [res.mean("HD", c, 20.0) for c in (0, 1)]
    ici_free = free.mean("HD", 1, 20.0)
    gap = (ici_free - fd[1]) / ici_free
    ok = fd[0] > hd[0] and fd[1] > hd[1] and gap <= 0.10
    _check(7, ok, f"cell 1 FD {fd[0]:.3f} vs HD {hd[0]:.3f}; cell 2 FD {fd[1]:.3f} vs HD {hd[1]:.3f}; "
                  f"cell 2 gap to ICI-free {ici_free:.3f} is {100 * gap:.2f}% (limit 10%)")


def test_criterion_08_strong_ici_gain():
    d = (10.0, 50.0, 150.0, 300.0, 450.0)
    res = run_sweep(SweepConfig(geometry=SINGLE, axis="d_p1_m", values=d, schemes=("FD_FICIC", "HD"),
                                trials=1000, seed=8))
    ratio = [res.mean("FD_FICIC", 0, v) / res.mean("HD", 0, v) for v in d]
    peak = int(np.argmax(ratio))
    unimodal = all(ratio[i] <= ratio[i + 1] for i in range(peak)) and \
        all(ratio[i] >= ratio[i + 1] for i in range(peak, len(d) - 1))
    rises_then_falls = 0 < peak < len(d) - 1
    ok = ratio[0] >= 2.5 and unimodal and rises_then_falls
    text = ", ".join(f"{v:g} m: {r:.2f}" for v, r in zip(d, ratio))
    _check(8, ok, f"FD/HD ratio {text} (need >= 2.5 at 10 m, rising then falling)")


def test_criterion_09_self_interference_threshold():
    sir = tuple(float(v) for v in range(40, 115, 5))
    res = run_sweep(SweepConfig(geometry=SINGLE, axis="sir_self_db", values=sir, schemes=("FD_FICIC", "HD"),
                                trials=1000, seed=9))
    gain = {c: [res.mean("FD_FICIC", c, v) / res.mean("HD", c, v) - 1.0 for v in sir] for c in (0, 1)}
    low = max(abs(gain[0][0]), abs(gain[1][0]))
    cross = {}
    for c in (0, 1):
        above = [v for v, g in zip(sir, gain[c]) if g > 0.02]
        cross[c] = above[0] if above else math.inf
    ok = (low <= 0.01 and cross[0] < cross[1] and abs(cross[0] - 60.0) <= 10.0
          and abs(cross[1] - 75.0) <= 10.0)
    _check(9, ok, f"gap at 40 dB {100 * low:.2f}% (limit 1%); >2% crossover at {cross[0]:g} dB for cell 1 "
                  f"(60 +/- 10) and {cross[1]:g} dB for cell 2 (75 +/- 10)")


def test_criterion_10_eicic_comp_orderings():
    inr = tuple(float(v) for v in range(0, 45, 5))
    geo = GeometryConfig(k_m=1, k_p=2, n_r=2, snr_edge_db=20.0)
    res = run_sweep(SweepConfig(geometry=geo, axis="inr_db", values=inr,
                                schemes=("FD_FICIC", "EICIC", "EICIC_PLUS_FICIC"), trials=500, seed=10))
    m = {s: [res.mean(s, 0, v) for v in inr] for s in ("FD_FICIC", "EICIC", "EICIC_PLUS_FICIC")}
    high = all(e > f for v, e, f in zip(inr, m["EICIC"], m["FD_FICIC"]) if v >= 30)
    low = all(f > e for v, e, f in zip(inr, m["EICIC"], m["FD_FICIC"]) if v <= 15)
    combo = all(c >= max(e, f) for c, e, f in zip(m["EICIC_PLUS_FICIC"], m["EICIC"], m["FD_FICIC"]))
    table = "; ".join(f"{v:g} dB: {f:.2f}/{e:.2f}/{c:.2f}"
                      for v, f, e, c in zip(inr, m["FD_FICIC"], m["EICIC"], m["EICIC_PLUS_FICIC"]))
    _check(10, high and low and combo,
           f"eICIC > fICIC at >= 30 dB: {high}; fICIC > eICIC at <= 15 dB: {low}; combined >= both: {combo} "
           f"[fICIC/eICIC/combined {table}]")


def test_criterion_11_wideband():
    geo = GeometryConfig(k_m=1, k_p=1, sir_self_db=110.0)
    res = run_sweep(SweepConfig(geometry=geo, axis="taps", values=(1.0, 2.0, 4.0), schemes=("FD_FICIC", "HD"),
                                trials=50, seed=11, wideband=WidebandConfig(geometry=geo, n_subcarriers=25)))
    rate = {}
    for r in res.rows:
        key = "HD" if r.scheme == "HD" else int(r.axis_value)
        rate.setdefault(key, {})[r.trial] = r.sum_rate_bps_hz
    nested = all(rate[4][t] >= rate[2][t] >= rate[1][t] >= rate["HD"][t] for t in range(50))
    means = [float(np.mean(list(rate[k].values()))) for k in (4, 2, 1, "HD")]

    rng = np.random.default_rng(1111)
    worst_grad = 0.0
    for _ in range(5):
        ws = random_wideband(rng)
        obj = WidebandObjective(ws, 4)
        theta = np.concatenate([0.05 * rng.standard_normal(2 * obj.n_taps), rng.uniform(0.2, 1.0, ws.n) / ws.n])
        while not math.isfinite(obj.value(theta)):
            theta[:2 * obj.n_taps] *= 0.5
        _, fd = orc.finite_diff_gradient(obj.value, theta, 1e-6)
        rel = float(np.linalg.norm(obj.gradient(theta) - fd) / np.linalg.norm(fd))
        worst_grad = rel if not rel <= worst_grad else worst_grad

    worst_flat = 0.0
    for s in _scenarios(1112, 20):
        flat = optimize_wideband(WidebandScenario.from_narrowband(s), 1)
        worst_flat = max(worst_flat, abs(flat.sum_rate - math.log2(1.0 + closed_form_sinr(prop1_constants(s)))))

    ok = nested and res.nonconvergence_rate == 0 and worst_grad <= 1e-4 and worst_flat <= 1e-4
    _check(11, ok, f"means L=4/2/1/HD {means[0]:.4f}/{means[1]:.4f}/{means[2]:.4f}/{means[3]:.4f}, "
                   f"per-instance nesting {nested}; gradient rel err {worst_grad:.1e} (tol 1e-4); "
                   f"N=1 L=1 vs closed form {worst_flat:.1e} (tol 1e-4)")


def _body(text):
    return text.split("\n", 1)[1]


def test_criterion_12_determinism_and_fuzz():
    cfg = SweepConfig(geometry=GeometryConfig(k_m=1, k_p=2, n_r=2), axis="snr_edge_db", values=(0.0, 20.0),
                      schemes=("FD_FICIC", "HD", "EICIC", "COMP_CB"), trials=20, seed=12, csi_mode="estimated")
    same = _body(run_sweep(cfg, 1).to_csv()) == _body(run_sweep(cfg, 2).to_csv())

    rng = np.random.default_rng(1212)
    aborts = []
    for i in range(10_000):
        fuzz = fuzz_configs.random_config(rng)
        try:
            run_sweep(fuzz, 1).to_csv()
        except Exception as exc:   # noqa: BLE001 - any escape counts as an abort
            aborts.append(f"#{i}: {type(exc).__name__}: {exc}")
    ok = same and not aborts
    detail = f"identical CSV bodies {same}; {len(aborts)} aborts in 10000 fuzzed configs"
    if aborts:
        detail += f" (first {aborts[0]})"
    _check(12, ok, detail)
