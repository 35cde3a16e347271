"""Evaluation-set derivation: per-sample distances, subsets, and bins.

For every validation sample we record its geographic distance d and its
geometric similarity cost s to the nearest training sample. Those two numbers
drive the close/far partition, the distribution-matched star subsets, and the
equal-width similarity bins used by the overfitting scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _simmatrix
from .errors import (
    ConfigError,
    DegenerateRange,
    EmptyDistribution,
    EmptyTrainingSet,
    UnmatchableDistributions,
)
from .matching import Sample, geo_distance, min_cost_assignment, prepare_sample


@dataclass(frozen=True)
class PerSampleStats:
    """Nearest-training-sample statistics for one validation sample."""

    sample_id: str
    d: float
    s: float
    nearest_train_id_by_d: str
    nearest_train_id_by_s: str
    s_topo: float | None = None


@dataclass(frozen=True)
class EvalSubsets:
    """Close/far partition plus the KL-matched star subsets."""

    close_ids: tuple[str, ...]
    far_ids: tuple[str, ...]
    close_star_ids: tuple[str, ...]
    far_star_ids: tuple[str, ...]
    t_dist: float
    pairing: tuple[tuple[str, str, float], ...]
    kl_value: float
    kl_threshold_used: float


@dataclass(frozen=True)
class SimilarityBins:
    """Equal-width bins over s for the far set.

    Bin i covers (edges[i], edges[i+1]]; the first bin also includes its
    lower edge. Empty bins keep their slot with count 0 and mu_s None.
    """

    edges: tuple[float, ...]
    bins: tuple[tuple[str, ...], ...]
    mu_s: tuple[float | None, ...]
    counts: tuple[int, ...]


def nearest_train_stats(
    val_samples: Sequence[Sample],
    train_samples: Sequence[Sample],
    delta: float = 10.0,
    n_pts: int = 20,
    workers: int = 1,
    sim_values: np.ndarray | None = None,
) -> list[PerSampleStats]:
    """Distance and similarity of each validation sample to its nearest
    training sample.

    Ties break toward the smallest training sample id. sim_values may carry a
    precomputed (len(val), len(train)) similarity matrix with training
    columns sorted by id; otherwise the matrix is computed here.
    """
    if len(train_samples) == 0:
        raise EmptyTrainingSet("nearest-training statistics need a non-empty training set")
    if len(val_samples) == 0:
        return []
    order = sorted(range(len(train_samples)), key=lambda i: train_samples[i].sample_id)
    train = [train_samples[i] for i in order]
    if sim_values is None:
        preps_v = [prepare_sample(v, n_pts) for v in val_samples]
        preps_t = [prepare_sample(t, n_pts) for t in train]
        sim_values = _simmatrix.cross_matrix(preps_v, preps_t, delta, workers)
    elif sim_values.shape != (len(val_samples), len(train)):
        raise ConfigError(
            f"similarity matrix shape {sim_values.shape} does not match "
            f"{(len(val_samples), len(train))}"
        )
    out = []
    for i, v in enumerate(val_samples):
        best_d = math.inf
        best_d_id = train[0].sample_id
        for t in train:
            dist = geo_distance(v, t)
            if dist < best_d:
                best_d = dist
                best_d_id = t.sample_id
        j = int(np.argmin(sim_values[i]))
        out.append(
            PerSampleStats(
                sample_id=v.sample_id,
                d=best_d,
                s=float(sim_values[i, j]),
                nearest_train_id_by_d=best_d_id,
                nearest_train_id_by_s=train[j].sample_id,
            )
        )
    return out


def split_close_far(
    stats: Sequence[PerSampleStats], t_dist: float = 5.0
) -> tuple[list[str], list[str]]:
    """Partition by distance: d <= t_dist is close, everything else far."""
    if t_dist <= 0:
        raise ConfigError(f"t_dist must be positive, got {t_dist}")
    close = [st.sample_id for st in stats if st.d <= t_dist]
    far = [st.sample_id for st in stats if st.d > t_dist]
    return close, far


def kl_divergence(
    p_samples: Sequence[float],
    q_samples: Sequence[float],
    bin_count: int = 20,
    epsilon: float = 1e-6,
) -> float:
    """KL(P||Q) between two value lists via smoothed shared-range histograms."""
    if len(p_samples) == 0 or len(q_samples) == 0:
        raise EmptyDistribution("KL divergence of an empty value list")
    if bin_count < 2:
        raise ConfigError(f"bin_count must be at least 2, got {bin_count}")
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    p = np.asarray(p_samples, dtype=np.float64)
    q = np.asarray(q_samples, dtype=np.float64)
    lo = min(p.min(), q.min())
    hi = max(p.max(), q.max())
    if lo == hi:
        return 0.0
    ph, _ = np.histogram(p, bins=bin_count, range=(lo, hi))
    qh, _ = np.histogram(q, bins=bin_count, range=(lo, hi))
    pd = ph.astype(np.float64) + epsilon
    qd = qh.astype(np.float64) + epsilon
    pd /= pd.sum()
    qd /= qd.sum()
    return float(np.sum(pd * np.log(pd / qd)))


def match_distributions(
    close_stats: Sequence[PerSampleStats],
    far_stats: Sequence[PerSampleStats],
    kl_max: float = 0.01,
    t_dist: float = 5.0,
    min_pairs: int = 10,
    bin_count: int = 20,
    epsilon: float = 1e-6,
) -> EvalSubsets:
    """Derive s-distribution-matched subsets of the close and far sets.

    The two sets are paired by minimum-cost assignment on |s_close - s_far|,
    then pairs are filtered by the largest |delta s| threshold (binary search
    over the sorted distinct pair gaps) whose retained subsets still satisfy
    kl_divergence < kl_max with at least min_pairs pairs.
    """
    if len(close_stats) == 0 or len(far_stats) == 0:
        raise EmptyDistribution("distribution matching needs non-empty close and far sets")
    if kl_max <= 0:
        raise ConfigError(f"kl_max must be positive, got {kl_max}")
    close = sorted(close_stats, key=lambda st: st.sample_id)
    far = sorted(far_stats, key=lambda st: st.sample_id)
    s_close = np.array([st.s for st in close])
    s_far = np.array([st.s for st in far])
    cost = np.abs(s_close[:, None] - s_far[None, :])
    assignment = min_cost_assignment(cost)
    pairing = tuple(
        (close[i].sample_id, far[j].sample_id, float(cost[i, j]))
        for i, j in assignment.pairs
    )
    gaps = np.array([g for _, _, g in pairing])

    def retained_at(threshold: float) -> np.ndarray:
        return np.flatnonzero(gaps <= threshold)

    def admissible(threshold: float) -> tuple[bool, float]:
        idx = retained_at(threshold)
        if len(idx) < min_pairs:
            return False, math.inf
        rows = [assignment.pairs[k][0] for k in idx]
        cols = [assignment.pairs[k][1] for k in idx]
        kl = kl_divergence(s_close[rows], s_far[cols], bin_count, epsilon)
        return kl < kl_max, kl

    candidates = sorted(set(float(g) for g in gaps))
    # the admissibility predicate is not monotone in the threshold, so the
    # binary search tracks the last admissible candidate it visited
    lo, hi = 0, len(candidates) - 1
    best_idx = -1
    best_kl = math.inf
    while lo <= hi:
        mid = (lo + hi) // 2
        ok, kl = admissible(candidates[mid])
        if ok:
            best_idx = mid
            best_kl = kl
            lo = mid + 1
        else:
            hi = mid - 1
    if best_idx < 0:
        raise UnmatchableDistributions(
            f"no |delta s| threshold keeps at least {min_pairs} pairs "
            f"with KL below {kl_max}"
        )
    threshold = candidates[best_idx]
    keep = retained_at(threshold)
    return EvalSubsets(
        close_ids=tuple(st.sample_id for st in close_stats),
        far_ids=tuple(st.sample_id for st in far_stats),
        close_star_ids=tuple(pairing[k][0] for k in keep),
        far_star_ids=tuple(pairing[k][1] for k in keep),
        t_dist=t_dist,
        pairing=pairing,
        kl_value=best_kl,
        kl_threshold_used=threshold,
    )


def bin_far_set(far_stats: Sequence[PerSampleStats], b: int = 10) -> SimilarityBins:
    """Split the far set into b equal-width bins over its s range."""
    if b < 2:
        raise ConfigError(f"bin count must be at least 2, got {b}")
    if len(far_stats) < b:
        raise ConfigError(f"need at least {b} far samples for {b} bins, got {len(far_stats)}")
    s = np.array([st.s for st in far_stats])
    lo = float(s.min())
    hi = float(s.max())
    if lo == hi:
        raise DegenerateRange("all far-set similarity values are identical")
    edges = np.linspace(lo, hi, b + 1)
    members: list[list[str]] = [[] for _ in range(b)]
    sums = np.zeros(b)
    for st in far_stats:
        # right-closed intervals; the minimum lands in bin 1
        idx = int(np.searchsorted(edges, st.s, side="left"))
        idx = min(max(idx, 1), b) - 1
        members[idx].append(st.sample_id)
        sums[idx] += st.s
    counts = tuple(len(m) for m in members)
    mu_s = tuple(
        (sums[i] / counts[i]) if counts[i] > 0 else None for i in range(b)
    )
    return SimilarityBins(
        edges=tuple(float(e) for e in edges),
        bins=tuple(tuple(m) for m in members),
        mu_s=mu_s,
        counts=counts,
    )
