"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each kernel is run once per backend before timing so jit compilation is
excluded. Reported times are medians over ``--repeat`` runs.
"""

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from robust_crowdsense import kernels


def _cases(rng):
    rho70 = rng.random(70)
    u = rng.random((50_000, 70))
    coef = rng.uniform(1, 500, size=420)
    expo = np.full(420, 3.0)
    return {
        "tail_dp T=70 k=63": ("tail_dp", (rho70, 63)),
        "tail_dp T=2000 k=1500": ("tail_dp", (rng.random(2000), 1500)),
        "count_hits 50000x70": ("count_hits", (u, rho70, 63)),
        "waterfill_power n=420": ("waterfill_power", (coef, expo, 400.0, 1e-10, 200)),
    }


def _median_time(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the results to this CSV file")
    args = ap.parse_args(argv)

    rows = []
    for label, (name, call_args) in _cases(np.random.default_rng(args.seed)).items():
        t_np = _median_time(kernels.IMPLEMENTATIONS["numpy"][name], call_args, args.repeat)
        t_nb = _median_time(kernels.IMPLEMENTATIONS["numba"][name], call_args, args.repeat)
        rows.append((label, t_np * 1e3, t_nb * 1e3, t_np / t_nb))

    header = ("kernel", "numpy_ms", "numba_ms", "speedup")
    width = max(len(r[0]) for r in rows)
    print(f"{header[0]:<{width}}  {header[1]:>10}  {header[2]:>10}  {header[3]:>8}")
    for label, a, b, s in rows:
        print(f"{label:<{width}}  {a:>10.3f}  {b:>10.3f}  {s:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows((label, f"{a:.4f}", f"{b:.4f}", f"{s:.2f}") for label, a, b, s in rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
