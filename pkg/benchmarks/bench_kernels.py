"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--frames 18000]

Workloads mirror real use: a 10-minute 30 Hz dyad scanned with 1.1 s
windows, a 6-scale moving-average pyramid over 50 expression coefficients,
and peak picking on one long component.
"""

import argparse
import timeit

import numpy as np

from behaviometry import kernels


def workloads(frames: int, rng):
    x = np.ascontiguousarray(rng.standard_normal(frames))
    y = np.ascontiguousarray(rng.standard_normal(frames))
    w, step, lag = 33, 15, 17
    starts = np.arange(lag, frames - w - lag + 1, step, dtype=np.int64)
    lags = np.arange(-lag, lag + 1, dtype=np.int64)
    coef = rng.standard_normal((frames, 50))
    long = np.ascontiguousarray(rng.standard_normal(frames * 10))
    thr = float(long.mean() + long.std())
    return {
        "window_lag_corr": lambda k: k.window_lag_corr(x, y, starts, w, lags),
        "moving_average x6": lambda k: [k.moving_average(coef, 3 * 2 ** i) for i in range(1, 7)],
        "find_peaks": lambda k: k.find_peaks(long, thr, 15),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--frames", type=int, default=18000, help="frames per signal")
    args = ap.parse_args(argv)

    if kernels.compiled is None:
        print("compiled kernels unavailable; build with "
              "`pip install --no-build-isolation -e .` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, fn in workloads(args.frames, rng).items():
        times = {}
        for label, impl in (("python", kernels.python), ("compiled", kernels.compiled)):
            fn(impl)  # warm-up
            times[label] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        print(f"{name:<20}{times['python'] * 1e3:>14.2f}{times['compiled'] * 1e3:>16.2f}"
              f"{times['python'] / times['compiled']:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
