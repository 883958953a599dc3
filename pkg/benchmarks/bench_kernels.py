"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--T 20000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from activeevent import _kernels_py

try:
    from activeevent import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(T, rng):
    x = rng.exponential(size=T)
    x[rng.random(T) < 0.05] *= 20
    n, radius = 30, 15
    H = _kernels_py.window_entropy(x, n)
    pred = np.sort(rng.choice(T, size=T // 50, replace=False))
    gt = np.sort(rng.choice(T, size=T // 50, replace=False))
    cuts = np.sort(rng.choice(np.arange(1, T), size=T // 100, replace=False))
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [T]])
    prom = 0.02 * np.log(n)
    return {
        "window_entropy": lambda m: m.window_entropy(x, n),
        "entropy_peaks": lambda m: m.entropy_peaks(x, H, n, radius, prom, 1e-12),
        "greedy_match_count": lambda m: m.greedy_match_count(pred, gt, 45),
        "segment_argmin": lambda m: m.segment_argmin(x, starts, ends),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=20000, help="stream length")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  max|diff|")
    for name, fn in cases(args.T, rng).items():
        tp, out_p = best_of(lambda: fn(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<20}{tp * 1e3:>12.2f}{'-':>12}{'-':>10}")
            continue
        tc, out_c = best_of(lambda: fn(_kernels), args.repeat)
        a, b = np.asarray(out_p, dtype=np.float64), np.asarray(out_c, dtype=np.float64)
        diff = float(np.nanmax(np.abs(a - b))) if a.size else 0.0
        print(f"{name:<20}{tp * 1e3:>12.2f}{tc * 1e3:>12.2f}{tp / tc:>10.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()
