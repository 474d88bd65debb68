"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends produce bit-identical output; each case checks that before
reporting timings.
"""
import argparse
import importlib
import time

import numpy as np

from committee_sortition import _pykernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def cases():
    desk_res = np.full(100, 10)
    desk_honest = np.arange(100) < 80
    wide_res = np.random.default_rng(0).integers(1, 5000, 2000)
    wide_honest = np.random.default_rng(1).random(2000) < 0.8
    u = np.random.default_rng(2).random(200_000)
    return [
        ("simulate desk (100 users, 2e5 trials)",
         lambda k: k.simulate_committees(desk_res, desk_honest, 0.05, 7, 0, 200_000)),
        ("simulate wide (2000 users, 2e3 trials)",
         lambda k: k.simulate_committees(wide_res, wide_honest, 0.001, 7, 0, 2_000)),
        ("quantiles n=1000 p=0.05 (2e5 draws)",
         lambda k: k.binom_quantile_many(u, 1000, 0.05)),
        ("quantiles n=1e6 p=0.004 (200 draws, walk)",
         lambda k: k.binom_quantile_many(u[:200], 1_000_000, 0.004)),
        ("uniform stream (1e6)",
         lambda k: k.trial_uniforms(3, 0, 1_000_000)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    try:
        compiled = importlib.import_module("committee_sortition._kernels")
    except ImportError:
        raise SystemExit("compiled kernels not built; run pip install -e . first")

    print(f"{'case':<44}{'cython s':>10}{'python s':>10}{'speedup':>9}")
    for name, fn in cases():
        t_c, out_c = best_of(lambda: fn(compiled), args.repeat)
        t_p, out_p = best_of(lambda: fn(_pykernels), args.repeat)
        for a, b in zip(np.atleast_1d(out_c) if not isinstance(out_c, tuple) else out_c,
                        np.atleast_1d(out_p) if not isinstance(out_p, tuple) else out_p):
            np.testing.assert_array_equal(a, b)
        print(f"{name:<44}{t_c:>10.4f}{t_p:>10.4f}{t_p / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
