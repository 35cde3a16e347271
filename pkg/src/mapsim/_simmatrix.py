"""Bulk sample-similarity matrices with optional process parallelism.

Each matrix entry is computed by the same single-threaded code path no matter
how many workers run, and blocks are assembled by index, so results are
bit-identical across worker counts and run orders.
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Sequence

import numpy as np

from . import _kernels
from .matching import PreparedSample, similarity_from_prepared

WORKERS_ENV = "MAPSIM_WORKERS"

_WORK: dict = {}


def resolve_workers(requested: int | None) -> int:
    """Explicit request wins; otherwise the MAPSIM_WORKERS variable; else 1."""
    if requested is None:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        if raw:
            try:
                requested = int(raw)
            except ValueError:
                raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
        else:
            requested = 1
    return max(1, requested)


def _init_worker(preps_a, preps_b, delta) -> None:
    _WORK["a"] = preps_a
    _WORK["b"] = preps_b
    _WORK["delta"] = delta


def _cross_block(args: tuple[int, int]) -> tuple[int, np.ndarray]:
    lo, hi = args
    a = _WORK["a"]
    b = _WORK["b"]
    delta = _WORK["delta"]
    block = np.empty((hi - lo, len(b)))
    for i in range(lo, hi):
        for j in range(len(b)):
            block[i - lo, j] = similarity_from_prepared(a[i], b[j], delta)
    return lo, block


def _upper_block(args: tuple[int, int]) -> tuple[int, list[np.ndarray]]:
    lo, hi = args
    a = _WORK["a"]
    delta = _WORK["delta"]
    n = len(a)
    rows = []
    for i in range(lo, hi):
        vals = np.empty(n - i - 1)
        for j in range(i + 1, n):
            vals[j - i - 1] = similarity_from_prepared(a[i], a[j], delta)
        rows.append(vals)
    return lo, rows


def _row_chunks(n_rows: int, workers: int) -> list[tuple[int, int]]:
    chunk = max(1, -(-n_rows // (workers * 4)))
    return [(lo, min(lo + chunk, n_rows)) for lo in range(0, n_rows, chunk)]


def _run(fn, n_rows: int, workers: int, preps_a, preps_b, delta):
    chunks = _row_chunks(n_rows, workers)
    if workers <= 1 or len(chunks) <= 1:
        _init_worker(preps_a, preps_b, delta)
        return [fn(c) for c in chunks]
    _kernels.warm_kernels()  # compile before forking so children reuse the JIT
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(
        max_workers=workers,
        mp_context=ctx,
        initializer=_init_worker,
        initargs=(preps_a, preps_b, delta),
    ) as pool:
        return [f.result() for f in as_completed(pool.submit(fn, c) for c in chunks)]


def cross_matrix(
    preps_a: Sequence[PreparedSample],
    preps_b: Sequence[PreparedSample],
    delta: float,
    workers: int = 1,
) -> np.ndarray:
    """Similarity of every row sample against every column sample."""
    out = np.empty((len(preps_a), len(preps_b)))
    if out.size == 0:
        return out
    for lo, block in _run(_cross_block, len(preps_a), workers, list(preps_a), list(preps_b), delta):
        out[lo : lo + len(block)] = block
    return out


def pairwise_matrix(
    preps: Sequence[PreparedSample], delta: float, workers: int = 1
) -> np.ndarray:
    """Symmetric all-pairs similarity with a zero diagonal.

    Each unordered pair is computed once and mirrored, so symmetry is exact.
    """
    n = len(preps)
    out = np.zeros((n, n))
    if n < 2:
        return out
    for lo, rows in _run(_upper_block, n - 1, workers, list(preps), None, delta):
        for k, vals in enumerate(rows):
            i = lo + k
            out[i, i + 1 :] = vals
            out[i + 1 :, i] = vals
    return out
