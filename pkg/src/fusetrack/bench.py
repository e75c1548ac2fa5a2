"""Time the compiled kernels against the numpy fallback.

    python -m fusetrack.bench --repeat 5
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from . import _fallback
from .geometry import BevGrid, cells_of

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(seed: int = 0):
    rng = np.random.default_rng(seed)
    grid = BevGrid()
    n_cells = grid.cells_per_side**2
    for n_pts in (1_000, 5_000, 50_000):
        pts = np.ascontiguousarray(rng.uniform(-51.2, 51.2, size=(n_pts, 18)))
        cells = np.ascontiguousarray(cells_of(pts[:, :2], grid))
        yield f"pillar_mean n={n_pts}", "pillar_mean", (cells, pts, n_cells)
    for n in (10, 50, 200):
        a = np.ascontiguousarray(rng.uniform(size=(n, n)))
        yield f"greedy_assign {n}x{n}", "greedy_assign", (a, 0.3)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for label, name, inputs in cases():
        t_py = _best(lambda: getattr(_fallback, name)(*inputs), args.repeat)
        if _kernels is None:
            print(f"{label:<26}{t_py * 1e3:>12.3f}{'n/a':>13}{'':>9}")
            continue
        ref = getattr(_fallback, name)(*inputs)
        got = getattr(_kernels, name)(*inputs)
        same = all(np.array_equal(a, b) for a, b in zip(ref, got)) if name == "pillar_mean" else ref == got
        if not same:
            raise AssertionError(f"{label}: backends disagree")
        t_cy = _best(lambda: getattr(_kernels, name)(*inputs), args.repeat)
        print(f"{label:<26}{t_py * 1e3:>12.3f}{t_cy * 1e3:>13.3f}{t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
