"""Time the numba kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from chillpass.kernels import _numba, _numpy


def cases(n, rng):
    values = 70 + rng.normal(0, 1, n)
    values[n // 3: n // 3 + n // 10] += 5
    a = np.sort(rng.uniform(0, n, 2 * (n // 100))).reshape(-1, 2)
    b = np.sort(rng.uniform(0, n, 2 * (n // 100))).reshape(-1, 2)
    ref = rng.uniform(50, 90, n)
    probe = ref * (1 + rng.normal(0, 0.05, n))
    mask = rng.random(n) < 0.9
    return {
        "chill_runs": lambda k: k.chill_runs(values, 70.0, 1.0, 10),
        "intersect_intervals": lambda k: k.intersect_intervals(a[:, 0], a[:, 1], b[:, 0], b[:, 1]),
        "mean_relative_difference": lambda k: k.mean_relative_difference(ref, probe, 1e-9),
        "bin_agreement": lambda k: k.bin_agreement(ref, probe, 5.0),
        "longest_true_run": lambda k: k.longest_true_run(mask),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, call in cases(args.n, rng).items():
        call(_numba)  # compile outside the timed region
        t_np = min(timeit.repeat(lambda: call(_numpy), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: call(_numba), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
