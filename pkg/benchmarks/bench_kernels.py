"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times the dual fixed point, the direction computation and a full multi-user
sum-rate solve under each available backend, and checks that both backends
return the same numbers.
"""

import argparse
import math
import timeit

import numpy as np

from ficic import _kernels
from ficic.channel import GeometryConfig, build_scenario
from ficic.multi import solve_sum_rate


def problem(k_p, n_t, seed):
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((k_p, n_t)) + 1j * rng.standard_normal((k_p, n_t))) / math.sqrt(2)
    gamma = 10.0 ** rng.uniform(-1, 1, k_p)
    return h, gamma


def time_call(fn, repeat):
    t = timeit.repeat(fn, number=1, repeat=repeat)
    return min(t)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; only the fallback is timed")

    cfg = GeometryConfig(k_m=1, k_p=2, n_r=2)
    scen = build_scenario(cfg, np.random.default_rng(7))
    rows = []
    for k_p, n_t in ((2, 2), (3, 4), (4, 8)):
        h, gamma = problem(k_p, n_t, k_p)
        lam0 = np.zeros(k_p)
        results, times = {}, {}
        for name in backends:
            _kernels.use_backend(name)
            results[name] = _kernels.fixed_point(h, gamma, lam0, 1e-10, 10000)
            t_fp = time_call(lambda: _kernels.fixed_point(h, gamma, lam0, 1e-10, 10000), args.repeat)
            lam = results[name][0]
            t_dir = time_call(lambda: _kernels.directions(h, lam), args.repeat)
            times[name] = (t_fp, t_dir)
        if len(results) == 2:
            diff = float(np.max(np.abs(results["compiled"][0] - results["python"][0])))
        else:
            diff = 0.0
        rows.append((f"K_P={k_p} N_t={n_t}", times, diff))

    solve_times = {}
    for name in backends:
        _kernels.use_backend(name)
        solve_times[name] = time_call(lambda: solve_sum_rate(scen), max(3, args.repeat // 4))

    print(f"{'case':<16}{'backend':<10}{'fixed point':>14}{'directions':>14}")
    for case, times, diff in rows:
        for name, (a, b) in times.items():
            print(f"{case:<16}{name:<10}{a * 1e6:>12.1f}us{b * 1e6:>12.1f}us")
        print(f"{'':<16}max |lam difference| = {diff:.2e}")
    for name, t in solve_times.items():
        print(f"solve_sum_rate  {name:<10}{t * 1e3:>12.2f}ms")
    if len(solve_times) == 2:
        print(f"speedup on solve_sum_rate: {solve_times['python'] / solve_times['compiled']:.1f}x")
    _kernels.use_backend("compiled" if "compiled" in backends else "python")


if __name__ == "__main__":
    main()
