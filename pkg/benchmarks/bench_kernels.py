"""Benchmark the hot kernels: numba fast path vs the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--frames 2000] [--samples 20000]

The same comparison can be forced end-to-end by running the whole package
with CPRGLOVE_NO_NUMBA=1, which swaps the fallback in at import time.
"""

import argparse
import time

import numpy as np

from cprglove import _kernels
from cprglove._kernels import (_peak_scan_loop, _peak_scan_np,
                               _synth_counts_loop, _synth_counts_np)


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_synth(n_frames):
    rng = np.random.default_rng(0)
    force = rng.uniform(0.0, 30.0, (n_frames, 13, 14))
    branch = rng.choice([-1.0, 1.0], (n_frames, 13, 14))
    args = (force, branch, 0.05, 50_000.0, 0.02, 0.1, 4700.0)
    rows = [("numpy", _time(_synth_counts_np, *args))]
    if _kernels.USE_NUMBA:
        jitted = _kernels.synth_counts
        jitted(*args)  # compile outside the timed region
        rows.append(("numba", _time(jitted, *args)))
    else:
        rows.append(("numba", None))
    return rows


def bench_peaks(n_samples):
    rng = np.random.default_rng(1)
    t = np.cumsum(rng.integers(68_000, 72_001, n_samples)).astype(np.int64)
    v = np.cumsum(rng.normal(0.0, 1.0, n_samples))
    args = (t, v, 300_000, 1.0)
    rows = [("numpy", _time(_peak_scan_np, *args))]
    if _kernels.USE_NUMBA:
        jitted = _kernels.peak_scan
        jitted(*args)
        rows.append(("numba", _time(jitted, *args)))
    else:
        rows.append(("numba", None))
    return rows


def _report(title, rows):
    print(f"\n{title}")
    base = rows[0][1]
    for name, sec in rows:
        if sec is None:
            print(f"  {name:<8} unavailable (CPRGLOVE_NO_NUMBA set or numba missing)")
        else:
            speedup = base / sec if sec else float("inf")
            print(f"  {name:<8} {sec * 1e3:9.3f} ms   x{speedup:.1f} vs numpy")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=2000,
                    help="tactile frames for the scan synthesis benchmark")
    ap.add_argument("--samples", type=int, default=20_000,
                    help="series length for the peak scan benchmark")
    args = ap.parse_args()

    # correctness spot-check before timing anything
    rng = np.random.default_rng(2)
    f = rng.uniform(0, 30, (4, 13, 14))
    b = np.ones((4, 13, 14))
    np.testing.assert_allclose(
        _synth_counts_np(f, b, 0.1, 50_000.0, 0.02, 0.1, 4700.0),
        _synth_counts_loop(f, b, 0.1, 50_000.0, 0.02, 0.1, 4700.0),
        atol=1e-9,
    )
    t = np.arange(100, dtype=np.int64) * 70_000
    v = np.sin(np.arange(100) / 3.0)
    np.testing.assert_array_equal(
        _peak_scan_np(t, v, 300_000, 0.1), _peak_scan_loop(t, v, 300_000, 0.1)
    )

    print(f"numba fast path active: {_kernels.USE_NUMBA}")
    _report(f"synth_counts ({args.frames} frames)", bench_synth(args.frames))
    _report(f"peak_scan ({args.samples} samples)", bench_peaks(args.samples))


if __name__ == "__main__":
    main()
