"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (numba compilation), then the best of
``--repeat`` wall-clock timings is reported for both flavours.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from rdprivacy import _kernels as K, make_spec, UtilityConstraint
from rdprivacy._problem import Problem
from rdprivacy.oracle import compositions


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = 64
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0, 1, size=(n, n))
    a = np.exp(-6.0 * (d - d.min(axis=1, keepdims=True)))
    q0 = np.full(n, 1.0 / n)
    yield "ba_solve 64x64", lambda f: f(p, a, q0, 1e-12, 5000), (K.ba_solve_numba, K.ba_solve_numpy)

    sym = [str(i) for i in range(4)]
    spec = make_spec({"r": sym, "h": sym, "z": sym}, rng.dirichlet(np.ones(64)), ["r"], ["h"],
                     UtilityConstraint(0.2), side_info="z")
    prob = Problem.compile(spec)
    nu = 8
    cost = rng.uniform(0, 1, size=(prob.ns, nu))
    qm = rng.dirichlet(np.ones(nu), size=prob.ns)
    mm_args = (prob.pxz, prob.s_of_x, prob.h_of_x, prob.ns, prob.nh, cost, 0.5, qm, 1e-14, 300)
    yield "mm_solve 16x8", lambda f: f(*mm_args), (K.mm_solve_numba, K.mm_solve_numpy)

    bits = ["0", "1"]
    small = make_spec({"r": bits, "h": bits}, rng.dirichlet(np.ones(4)), ["r"], ["h"],
                      UtilityConstraint(0.2))
    bp = Problem.compile(small)
    comps = compositions(16, 2)
    bs_args = (bp.pxz, bp.s_of_x, bp.h_of_x, bp.r_of_x, bp.nh, bp.active_s.astype(np.int64),
               comps, 16.0, np.ascontiguousarray(bp.dist[0]), 0.2, 0.3)
    yield "brute_scan q=16 m=2", lambda f: f(*bs_args), (K.brute_scan_numba, K.brute_scan_numpy)

    codes = rng.integers(0, 16, size=1_000_000)
    cdf = np.cumsum(rng.dirichlet(np.ones(8), size=16), axis=1)
    cdf[:, -1] = 1.0
    yield ("sample_rows 1e6", lambda f: f(np.uint64(7), codes, cdf),
           (K.sample_rows_numba, K.sample_rows_numpy))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, call, (fast, slow) in cases(np.random.default_rng(0)):
        tf = best_of(lambda: call(fast), args.repeat)
        ts = best_of(lambda: call(slow), args.repeat)
        print(f"{name:<22}{tf * 1e3:>12.2f}{ts * 1e3:>12.2f}{ts / tf:>9.1f}x")


if __name__ == "__main__":
    main()
