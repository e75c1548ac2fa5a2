# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match ``_fallback`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def pillar_mean(const cnp.int64_t[::1] cells, const double[:, ::1] feats, Py_ssize_t n_cells):
    """Per-cell mean of feature rows; rows with cell < 0 are skipped.

    Sums run in input order within each cell, then divide by the count.
    """
    cdef Py_ssize_t n = cells.shape[0]
    cdef Py_ssize_t c = feats.shape[1]
    cdef Py_ssize_t i, k, cell
    cdef double cnt
    out = np.zeros((n_cells, c), dtype=np.float64)
    counts = np.zeros(n_cells, dtype=np.int64)
    cdef double[:, ::1] acc = out
    cdef cnp.int64_t[::1] cnts = counts
    with nogil:
        for i in range(n):
            cell = cells[i]
            if cell < 0:
                continue
            cnts[cell] += 1
            for k in range(c):
                acc[cell, k] += feats[i, k]
        for cell in range(n_cells):
            if cnts[cell] > 1:
                cnt = <double>cnts[cell]
                for k in range(c):
                    acc[cell, k] = acc[cell, k] / cnt
    return out, counts


def greedy_assign(const double[:, ::1] a, double threshold):
    """Repeatedly take the largest remaining entry >= threshold.

    Ties resolve to the lowest row, then the lowest column. Each row caches its
    best free column; only rows whose cached column gets taken are rescanned.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t i, j, bi, bj, k
    cdef double best, v
    row_used = np.zeros(n, dtype=np.uint8)
    col_used = np.zeros(m, dtype=np.uint8)
    row_best = np.full(n, -np.inf)
    row_arg = np.full(n, -1, dtype=np.intp)
    cdef unsigned char[::1] ru = row_used
    cdef unsigned char[::1] cu = col_used
    cdef double[::1] rb = row_best
    cdef Py_ssize_t[::1] ra = row_arg
    matches = []
    for i in range(n):
        _rescan(a, cu, rb, ra, i, m)
    for k in range(min(n, m)):
        bi = -1
        best = -1.0
        for i in range(n):
            if not ru[i] and ra[i] >= 0 and rb[i] > best:
                best = rb[i]
                bi = i
        if bi < 0 or best < threshold:
            break
        bj = ra[bi]
        ru[bi] = 1
        cu[bj] = 1
        matches.append((bi, bj))
        for i in range(n):
            if not ru[i] and ra[i] == bj:
                _rescan(a, cu, rb, ra, i, m)
    return matches


cdef inline void _rescan(const double[:, ::1] a, unsigned char[::1] cu, double[::1] rb,
                         Py_ssize_t[::1] ra, Py_ssize_t i, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j
    cdef double v
    rb[i] = -1.0
    ra[i] = -1
    for j in range(m):
        if cu[j]:
            continue
        v = a[i, j]
        if v > rb[i]:
            rb[i] = v
            ra[i] = j
