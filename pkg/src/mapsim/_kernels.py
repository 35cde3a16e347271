"""JIT-compiled inner loops for curve distances.

Everything here operates on plain float64 arrays of resampled vertices and is
written so it also runs as ordinary Python when numba is unavailable (the
decorator then becomes a no-op). All dynamic-programming kernels are
comparison-only: they select among precomputed pairwise distances and never
introduce new rounding, which keeps argument-swapped evaluations bit-exact.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def dfd_from_matrix(d):
    """Discrete Frechet distance given a pairwise distance matrix.

    Rolling single-row formulation of the classic recurrence
    DP[i, j] = max(d[i, j], min(DP[i-1, j], DP[i, j-1], DP[i-1, j-1])).
    """
    n, m = d.shape
    row = np.empty(m)
    acc = d[0, 0]
    row[0] = acc
    for j in range(1, m):
        if d[0, j] > acc:
            acc = d[0, j]
        row[j] = acc
    for i in range(1, n):
        diag = row[0]
        left = row[0]
        if d[i, 0] > left:
            left = d[i, 0]
        row[0] = left
        for j in range(1, m):
            up = row[j]
            best = up
            if left < best:
                best = left
            if diag < best:
                best = diag
            if d[i, j] > best:
                best = d[i, j]
            diag = up
            left = best
            row[j] = best
    return row[m - 1]


@njit(cache=True)
def _dfd_cols_reversed(d):
    """Frechet DP with the column sequence traversed last-to-first."""
    n, m = d.shape
    row = np.empty(m)
    acc = d[0, m - 1]
    row[0] = acc
    for j in range(1, m):
        if d[0, m - 1 - j] > acc:
            acc = d[0, m - 1 - j]
        row[j] = acc
    for i in range(1, n):
        diag = row[0]
        left = row[0]
        if d[i, m - 1] > left:
            left = d[i, m - 1]
        row[0] = left
        for j in range(1, m):
            c = m - 1 - j
            up = row[j]
            best = up
            if left < best:
                best = left
            if diag < best:
                best = diag
            if d[i, c] > best:
                best = d[i, c]
            diag = up
            left = best
            row[j] = best
    return row[m - 1]


@njit(cache=True)
def line_min_from_matrix(d):
    """Min Frechet over the two traversal orders of an open polyline."""
    f = dfd_from_matrix(d)
    r = _dfd_cols_reversed(d)
    return f if f < r else r


@njit(cache=True)
def polygon_min_from_matrix(d):
    """Min Frechet over all 2p closed-loop readings of the column polygon.

    Rows are a fixed vertex reading; columns are tried at every cyclic start
    offset in both traversal directions.
    """
    p = d.shape[0]
    best = np.inf
    row = np.empty(p)
    for s in range(p):
        for o in range(2):
            acc = d[0, s]
            row[0] = acc
            for j in range(1, p):
                c = (s + j) % p if o == 0 else (s - j) % p
                if d[0, c] > acc:
                    acc = d[0, c]
                row[j] = acc
            for i in range(1, p):
                diag = row[0]
                left = row[0]
                if d[i, s] > left:
                    left = d[i, s]
                row[0] = left
                for j in range(1, p):
                    c = (s + j) % p if o == 0 else (s - j) % p
                    up = row[j]
                    b = up
                    if left < b:
                        b = left
                    if diag < b:
                        b = diag
                    if d[i, c] > b:
                        b = d[i, c]
                    diag = up
                    left = b
                    row[j] = b
            if row[p - 1] < best:
                best = row[p - 1]
    return best


@njit(cache=True)
def line_cost_matrix(stack_a, stack_b):
    """Pairwise orientation-searched Frechet costs between polyline stacks.

    stack_a: (na, p, 2), stack_b: (nb, p, 2); returns (na, nb).
    """
    na = stack_a.shape[0]
    nb = stack_b.shape[0]
    p = stack_a.shape[1]
    q = stack_b.shape[1]
    out = np.empty((na, nb))
    d = np.empty((p, q))
    for x in range(na):
        for y in range(nb):
            for i in range(p):
                ax = stack_a[x, i, 0]
                ay = stack_a[x, i, 1]
                for j in range(q):
                    dx = ax - stack_b[y, j, 0]
                    dy = ay - stack_b[y, j, 1]
                    d[i, j] = (dx * dx + dy * dy) ** 0.5
            out[x, y] = line_min_from_matrix(d)
    return out


@njit(cache=True)
def polygon_cost_matrix(stack_a, stack_b):
    """Pairwise reading-searched Frechet costs between polygon stacks.

    Vertices must already be in canonical order. For each pair the side with
    the lexicographically smaller vertex sequence is held fixed and the other
    side's 2p readings are searched, so swapping the stacks transposes the
    result exactly.
    """
    na = stack_a.shape[0]
    nb = stack_b.shape[0]
    p = stack_a.shape[1]
    out = np.empty((na, nb))
    d = np.empty((p, p))
    for x in range(na):
        for y in range(nb):
            a_fixed = True
            for i in range(p):
                av = stack_a[x, i, 0]
                bv = stack_b[y, i, 0]
                if av != bv:
                    a_fixed = av < bv
                    break
                av = stack_a[x, i, 1]
                bv = stack_b[y, i, 1]
                if av != bv:
                    a_fixed = av < bv
                    break
            if a_fixed:
                for i in range(p):
                    ax = stack_a[x, i, 0]
                    ay = stack_a[x, i, 1]
                    for j in range(p):
                        dx = ax - stack_b[y, j, 0]
                        dy = ay - stack_b[y, j, 1]
                        d[i, j] = (dx * dx + dy * dy) ** 0.5
            else:
                for i in range(p):
                    bx = stack_b[y, i, 0]
                    by = stack_b[y, i, 1]
                    for j in range(p):
                        dx = bx - stack_a[x, j, 0]
                        dy = by - stack_a[x, j, 1]
                        d[i, j] = (dx * dx + dy * dy) ** 0.5
            out[x, y] = polygon_min_from_matrix(d)
    return out


def warm_kernels() -> None:
    """Trigger JIT compilation on tiny inputs (cheap no-op afterwards)."""
    d = np.zeros((2, 2))
    dfd_from_matrix(d)
    line_min_from_matrix(d)
    polygon_min_from_matrix(d)
    tiny = np.zeros((1, 2, 2))
    line_cost_matrix(tiny, tiny)
    polygon_cost_matrix(tiny, tiny)
