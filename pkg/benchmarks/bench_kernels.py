#!/usr/bin/env python3
"""Time the two hot kernels against their pure-numpy fallbacks.

The backend is chosen once at import from MELSCRIBE_DISABLE_NUMBA, so the
comparison runs each backend in its own subprocess and prints one table:

    $ python3 benchmarks/bench_kernels.py

Workloads approximate batch use: pooling a two-minute 345 Hz feature
matrix into sixteenth-note cells, and onset matching over a pair of
3000-note transcripts.  The parent also cross-checks the two backends'
results (pooled means to round-off, match counts exactly).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

POOL_SECONDS = 120.0
POOL_RATE_HZ = 345.0
POOL_DIM = 229
CELL_S = 0.125  # one sixteenth at 120 BPM
MATCH_NOTES = 3000
MATCH_SPAN_S = 60.0
MATCH_TOL_S = 0.05
REPEATS = 7


def pool_case(rng: np.random.Generator):
    n_frames = int(POOL_SECONDS * POOL_RATE_HZ)
    frames = rng.normal(size=(n_frames, POOL_DIM)).astype(np.float32)
    times = np.arange(n_frames) / POOL_RATE_HZ
    n_cells = int(POOL_SECONDS / CELL_S)
    bounds = np.arange(n_cells + 1) * CELL_S
    starts = np.searchsorted(times, bounds).astype(np.int64)
    return frames, starts


def match_case(rng: np.random.Generator):
    left = np.sort(rng.uniform(0.0, MATCH_SPAN_S, size=MATCH_NOTES))
    right = np.sort(rng.uniform(0.0, MATCH_SPAN_S, size=MATCH_NOTES))
    lo = np.searchsorted(right, left - MATCH_TOL_S, side="left")
    hi = np.searchsorted(right, left + MATCH_TOL_S, side="right")
    indptr = np.zeros(MATCH_NOTES + 1, dtype=np.int64)
    np.cumsum(hi - lo, out=indptr[1:])
    indices = np.concatenate(
        [np.arange(a, b, dtype=np.int64) for a, b in zip(lo, hi)]
    )
    return indptr, indices, len(left), len(right)


def median_ms(fn, repeats: int = REPEATS) -> float:
    fn()  # warmup; includes JIT compilation when numba is active
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples)


def run_child() -> dict:
    from melscribe.kernels import HAS_NUMBA, match_count, pool_segments

    rng = np.random.default_rng(7)
    frames, starts = pool_case(rng)
    indptr, indices, n_left, n_right = match_case(rng)

    pooled, counts = pool_segments(frames, starts)
    matched = match_count(indptr, indices, n_left, n_right)
    return {
        "backend": "numba" if HAS_NUMBA else "numpy",
        "pool_ms": median_ms(lambda: pool_segments(frames, starts)),
        "match_ms": median_ms(lambda: match_count(indptr, indices, n_left, n_right)),
        "pool_checksum": float(pooled.sum()),
        "frame_count": int(counts.sum()),
        "match_size": matched,
    }


def spawn(disable_numba: bool) -> dict:
    env = dict(os.environ)
    env["MELSCRIBE_DISABLE_NUMBA"] = "1" if disable_numba else "0"
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--child"],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        print(json.dumps(run_child()))
        return 0

    print("benchmarking numpy fallback ...", file=sys.stderr)
    numpy_row = spawn(disable_numba=True)
    print("benchmarking numba kernels ...", file=sys.stderr)
    numba_row = spawn(disable_numba=False)

    if numba_row["backend"] != "numba":
        print("note: numba unavailable; both rows ran the numpy fallback",
              file=sys.stderr)

    assert numpy_row["match_size"] == numba_row["match_size"]
    assert numpy_row["frame_count"] == numba_row["frame_count"]
    rel = abs(numpy_row["pool_checksum"] - numba_row["pool_checksum"]) / max(
        1.0, abs(numpy_row["pool_checksum"])
    )
    assert rel < 1e-9, rel

    n_frames = int(POOL_SECONDS * POOL_RATE_HZ)
    print(f"\npooling: {n_frames} x {POOL_DIM} frames -> "
          f"{int(POOL_SECONDS / CELL_S)} cells")
    print(f"matching: {MATCH_NOTES} x {MATCH_NOTES} onsets, "
          f"{numpy_row['match_size']} matched")
    print()
    header = f"{'kernel':<10} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for kernel, key in (("pooling", "pool_ms"), ("matching", "match_ms")):
        a, b = numpy_row[key], numba_row[key]
        print(f"{kernel:<10} {a:>12.2f} {b:>12.2f} {a / b:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
