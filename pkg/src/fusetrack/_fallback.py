"""Pure numpy/Python versions of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np


def pillar_mean(cells: np.ndarray, feats: np.ndarray, n_cells: int):
    keep = cells >= 0
    cells = cells[keep]
    feats = feats[keep]
    out = np.zeros((n_cells, feats.shape[1]), dtype=np.float64)
    # ufunc.at is unbuffered and applies rows in index order, which keeps the
    # per-cell summation order equal to input order.
    np.add.at(out, cells, feats)
    counts = np.bincount(cells, minlength=n_cells).astype(np.int64)
    occupied = counts > 1
    out[occupied] /= counts[occupied, None].astype(np.float64)
    return out, counts


def greedy_assign(a: np.ndarray, threshold: float):
    a = np.array(a, dtype=np.float64)
    if a.size == 0:
        return []
    work = np.where(np.isnan(a), -np.inf, a)
    matches = []
    for _ in range(min(a.shape)):
        # argmax returns the first maximum in row-major order: lowest row, then column
        flat = int(np.argmax(work))
        i, j = divmod(flat, a.shape[1])
        if not work[i, j] >= threshold:
            break
        matches.append((i, j))
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return matches
