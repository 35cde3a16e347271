"""Dataset-level diagnostics built on the all-pairs similarity graph.

The minimum spanning tree of the similarity graph drives three tools: a
diversity measure (total tree weight), near-duplicate sparsification
(clusters under a similarity threshold), and a three-way dataset split that
cuts the tree at its heaviest admissible edges.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _simmatrix
from .errors import (
    ConfigError,
    DataError,
    DuplicateId,
    EmptySet,
    NoFeasibleSplit,
)
from .matching import Sample, prepare_sample

KERNEL_TAG = "frechet-l2"


@dataclass(frozen=True)
class SimMeta:
    """Parameters that determine a similarity matrix's values."""

    delta: float
    n_pts: int
    content_hash: bytes


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense sample-similarity values with their row/column ids."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    values: np.ndarray
    meta: SimMeta

    @property
    def square(self) -> bool:
        return self.row_ids == self.col_ids


@dataclass(frozen=True)
class Mst:
    """Minimum spanning tree of a square similarity matrix."""

    node_ids: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    total_weight: float


@dataclass(frozen=True)
class Cluster:
    """One sparsification cluster and its chosen representative."""

    representative: str
    member_ids: tuple[str, ...]


@dataclass(frozen=True)
class SparsifyResult:
    retained_ids: tuple[str, ...]
    clusters: tuple[Cluster, ...]
    threshold: float


@dataclass(frozen=True)
class SplitAssignment:
    """Three-way dataset partition produced by cutting two MST edges."""

    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    cut_edges: tuple[tuple[str, str, float], tuple[str, str, float]]
    score: float


def matrix_content_hash(
    row_ids: Sequence[str], col_ids: Sequence[str], delta: float, n_pts: int
) -> bytes:
    """Hash of everything that determines the matrix values."""
    payload = "|".join(
        [
            KERNEL_TAG,
            repr(float(delta)),
            str(int(n_pts)),
            "\x1f".join(row_ids),
            "\x1f".join(col_ids),
        ]
    )
    return hashlib.sha256(payload.encode("utf-8")).digest()


def _check_unique_ids(samples: Sequence[Sample]) -> None:
    seen = set()
    for s in samples:
        if s.sample_id in seen:
            raise DuplicateId(f"duplicate sample id {s.sample_id!r}")
        seen.add(s.sample_id)


def similarity_graph(
    samples: Sequence[Sample], delta: float = 10.0, n_pts: int = 20, workers: int = 1
) -> SimilarityMatrix:
    """All-pairs sample similarity: symmetric with a zero diagonal."""
    if len(samples) < 2:
        raise EmptySet("a similarity graph needs at least 2 samples")
    _check_unique_ids(samples)
    preps = [prepare_sample(s, n_pts) for s in samples]
    values = _simmatrix.pairwise_matrix(preps, delta, workers)
    ids = tuple(s.sample_id for s in samples)
    return SimilarityMatrix(
        ids, ids, values, SimMeta(delta, n_pts, matrix_content_hash(ids, ids, delta, n_pts))
    )


def cross_similarity(
    rows: Sequence[Sample],
    cols: Sequence[Sample],
    delta: float = 10.0,
    n_pts: int = 20,
    workers: int = 1,
) -> SimilarityMatrix:
    """Similarity of every row sample against every column sample."""
    if len(rows) == 0 or len(cols) == 0:
        raise EmptySet("cross similarity needs non-empty row and column sets")
    _check_unique_ids(rows)
    _check_unique_ids(cols)
    preps_r = [prepare_sample(s, n_pts) for s in rows]
    preps_c = [prepare_sample(s, n_pts) for s in cols]
    values = _simmatrix.cross_matrix(preps_r, preps_c, delta, workers)
    rid = tuple(s.sample_id for s in rows)
    cid = tuple(s.sample_id for s in cols)
    return SimilarityMatrix(
        rid, cid, values, SimMeta(delta, n_pts, matrix_content_hash(rid, cid, delta, n_pts))
    )


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def mst(sim: SimilarityMatrix) -> Mst:
    """Exact minimum spanning tree with deterministic tie-breaking.

    Edges are considered in (weight, id_a, id_b) order, so the chosen tree
    does not depend on sample input order even when weights tie.
    """
    if not sim.square:
        raise DataError("minimum spanning tree needs a square similarity matrix")
    values = sim.values
    if not np.allclose(values, values.T, rtol=0.0, atol=1e-9):
        raise DataError("similarity matrix is not symmetric")
    ids = sim.row_ids
    n = len(ids)
    if n < 2:
        return Mst(ids, (), 0.0)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = ids[i], ids[j]
            if b < a:
                a, b = b, a
            edges.append((float(values[i, j]), a, b, i, j))
    edges.sort(key=lambda e: (e[0], e[1], e[2]))
    uf = _UnionFind(n)
    chosen = []
    total = 0.0
    for w, a, b, i, j in edges:
        if uf.union(i, j):
            chosen.append((a, b, w))
            total += w
            if len(chosen) == n - 1:
                break
    return Mst(ids, tuple(chosen), total)


def geomdiv(
    samples: Sequence[Sample], delta: float = 10.0, n_pts: int = 20, workers: int = 1
) -> float:
    """Geometric diversity: total MST weight of the similarity graph."""
    if len(samples) == 0:
        raise EmptySet("diversity of an empty sample set")
    if len(samples) == 1:
        return 0.0
    return mst(similarity_graph(samples, delta, n_pts, workers)).total_weight


def cover(
    d1: Sequence[Sample],
    d2: Sequence[Sample],
    delta: float = 10.0,
    n_pts: int = 20,
    workers: int = 1,
) -> float:
    """Directed coverage: mean nearest-neighbour similarity of d1 into d2."""
    values = cross_similarity(d1, d2, delta, n_pts, workers).values
    return float(values.min(axis=1).mean())


def geomsim(
    d1: Sequence[Sample],
    d2: Sequence[Sample],
    delta: float = 10.0,
    n_pts: int = 20,
    workers: int = 1,
) -> float:
    """Symmetric coverage: mean of the two directed cover values."""
    values = cross_similarity(d1, d2, delta, n_pts, workers).values
    c12 = float(values.min(axis=1).mean())
    c21 = float(values.min(axis=0).mean())
    return 0.5 * (c12 + c21)


def sparsify_from_mst(tree: Mst, threshold: float) -> SparsifyResult:
    """Cluster the tree by deleting edges with weight >= threshold and keep
    one representative per cluster.

    The representative is the member with the lowest mean weight over its
    incident kept edges (ties to the smallest id); singletons represent
    themselves.
    """
    if threshold < 0:
        raise ConfigError(f"threshold must be non-negative, got {threshold}")
    ids = tree.node_ids
    index = {sid: k for k, sid in enumerate(ids)}
    uf = _UnionFind(len(ids))
    incident: dict[str, list[float]] = {sid: [] for sid in ids}
    for a, b, w in tree.edges:
        if w < threshold:
            uf.union(index[a], index[b])
            incident[a].append(w)
            incident[b].append(w)
    groups: dict[int, list[str]] = {}
    for sid in ids:
        groups.setdefault(uf.find(index[sid]), []).append(sid)
    clusters = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        members = sorted(groups[root])
        rep = min(
            members,
            key=lambda sid: (
                sum(incident[sid]) / len(incident[sid]) if incident[sid] else 0.0,
                sid,
            ),
        )
        clusters.append(Cluster(rep, tuple(members)))
    retained = tuple(sorted(c.representative for c in clusters))
    return SparsifyResult(retained, tuple(clusters), threshold)


def sparsify(
    samples: Sequence[Sample],
    threshold: float,
    delta: float = 10.0,
    n_pts: int = 20,
    workers: int = 1,
) -> SparsifyResult:
    """Prune near-duplicate samples; see sparsify_from_mst for the rule."""
    if len(samples) == 0:
        raise EmptySet("cannot sparsify an empty sample set")
    if len(samples) == 1:
        only = samples[0].sample_id
        return SparsifyResult((only,), (Cluster(only, (only,)),), threshold)
    return sparsify_from_mst(mst(similarity_graph(samples, delta, n_pts, workers)), threshold)


def _component_nodes(
    adjacency: dict[str, list[tuple[str, float]]],
    start: str,
    skip: frozenset[tuple[str, str]],
    within: set[str] | None = None,
) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for other, _ in adjacency[node]:
            if (node, other) in skip or (other, node) in skip:
                continue
            if within is not None and other not in within:
                continue
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen


def split_from_mst(
    tree: Mst,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
    size_tolerance: float = 0.02,
    alpha: float = 1.0,
    top_fraction: float = 0.05,
) -> SplitAssignment:
    """Three-way split by cutting two heavy MST edges.

    First-cut candidates are the heaviest top_fraction of edges whose larger
    component lands within size_tolerance (relative) of the first fraction;
    the second cut splits the remainder near the other two fractions. Each
    admissible cut pair is scored by
    (w1 + w2) / (2 * max edge weight) - alpha * mean relative size deviation
    and the best-scoring pair wins. Parts become train/val/test in order of
    decreasing size (ties toward the part with the smallest id).
    """
    _validate_fractions(fractions)
    ids = tree.node_ids
    n = len(ids)
    if n < 10:
        raise ConfigError(f"splitting needs at least 10 samples, got {n}")
    f_train, f_val, f_test = fractions
    edges_desc = sorted(tree.edges, key=lambda e: (-e[2], e[0], e[1]))
    pool = edges_desc[: max(1, math.ceil(top_fraction * len(edges_desc)))]
    w_max = edges_desc[0][2] if edges_desc else 0.0
    adjacency: dict[str, list[tuple[str, float]]] = {sid: [] for sid in ids}
    for a, b, w in tree.edges:
        adjacency[a].append((b, w))
        adjacency[b].append((a, w))

    second_targets = [(f_val, f_test)]
    if f_val != f_test:
        second_targets.append((f_test, f_val))

    best: tuple[float, tuple, tuple] | None = None
    for e1 in pool:
        a1, b1, w1 = e1
        skip1 = frozenset({(a1, b1)})
        side = _component_nodes(adjacency, a1, skip1)
        if len(side) < n - len(side):
            side = set(ids) - side
        dev_train = abs(len(side) / n - f_train) / f_train
        if dev_train > size_tolerance:
            continue
        rest = set(ids) - side
        rest_edges = sorted(
            (e for e in tree.edges if e[0] in rest and e[1] in rest),
            key=lambda e: (-e[2], e[0], e[1]),
        )
        for e2 in rest_edges:
            a2, b2, w2 = e2
            skip2 = frozenset({(a1, b1), (a2, b2)})
            part_a = _component_nodes(adjacency, a2, skip2, within=rest)
            part_b = rest - part_a
            if not part_b:
                continue
            for fa, fb in second_targets:
                dev_a = abs(len(part_a) / n - fa) / fa
                dev_b = abs(len(part_b) / n - fb) / fb
                if dev_a > size_tolerance or dev_b > size_tolerance:
                    continue
                sep = (w1 + w2) / (2.0 * w_max) if w_max > 0 else 0.0
                score = sep - alpha * (dev_train + dev_a + dev_b) / 3.0
                if best is None or score > best[0]:
                    parts = sorted(
                        [side, part_a, part_b], key=lambda p: (-len(p), min(p))
                    )
                    best = (score, (e1, e2), tuple(tuple(sorted(p)) for p in parts))
    if best is None:
        raise NoFeasibleSplit(
            f"no pair of tree cuts satisfies the {size_tolerance:.0%} size tolerance"
        )
    score, cuts, (train, val, test) = best
    return SplitAssignment(train, val, test, cuts, score)


def _validate_fractions(fractions: tuple[float, float, float]) -> None:
    if len(fractions) != 3:
        raise ConfigError(f"need exactly 3 fractions, got {len(fractions)}")
    if any(f <= 0 or f >= 1 for f in fractions):
        raise ConfigError(f"fractions must lie strictly inside (0, 1), got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)}")
    if fractions[0] <= max(fractions[1], fractions[2]):
        raise ConfigError("the first (training) fraction must be the largest")


def geometric_split(
    samples: Sequence[Sample],
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
    size_tolerance: float = 0.02,
    alpha: float = 1.0,
    delta: float = 10.0,
    n_pts: int = 20,
    top_fraction: float = 0.05,
    workers: int = 1,
) -> SplitAssignment:
    """Derive a train/val/test split that separates dissimilar geometry."""
    _validate_fractions(fractions)
    if len(samples) < 10:
        raise ConfigError(f"splitting needs at least 10 samples, got {len(samples)}")
    tree = mst(similarity_graph(samples, delta, n_pts, workers))
    return split_from_mst(tree, fractions, size_tolerance, alpha, top_fraction)
