"""Prediction-quality metrics and the two overfitting scores.

Detection-style mAP uses Chamfer distance thresholds; the reconstruction
measure M/IQR summarizes the distribution of bipartite-matched Frechet costs
between predictions and ground truth. The overfitting scores compare M across
evaluation subsets and across similarity bins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    DataError,
    DegenerateRange,
    EmptyDistribution,
    NoGroundTruth,
    ZeroBaseline,
)
from .eval_sets import SimilarityBins
from .geometry import (
    POLYLINE,
    MapElement,
    chamfer_distance,
    prepare_element,
    resample_uniform,
)
from .matching import Sample, min_cost_assignment, prepare_sample


@dataclass(frozen=True)
class PredictionSet:
    """Predicted elements for one sample, each with a confidence."""

    sample_id: str
    elements: tuple[tuple[MapElement, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        for _, conf in self.elements:
            if not (0.0 <= conf <= 1.0) or conf != conf:
                raise DataError(f"confidence must lie in [0, 1], got {conf}")


@dataclass(frozen=True)
class MatchDistribution:
    """Pooled matched Frechet costs between predictions and ground truth."""

    costs: tuple[float, ...]
    unmatched_gt_count: int
    sample_ids: tuple[str, ...]


def _resampled_class_elements(
    elements: Sequence[MapElement], class_id: int, n_pts: int
) -> list[np.ndarray]:
    return [
        resample_uniform(e, n_pts) for e in elements if e.class_id == class_id
    ]


def ap_chamfer(
    preds: Sequence[PredictionSet],
    gts: Sequence[Sample],
    class_id: int,
    tau: float,
    n_pts: int = 20,
) -> float:
    """Average precision for one class at one Chamfer-distance threshold.

    Predictions are pooled across samples and ranked by confidence (ties by
    sample id, then element index). Each one greedily takes the unclaimed
    ground-truth element of the same sample with the smallest Chamfer
    distance and scores a true positive when that distance is below tau.
    The area under the precision-recall curve uses the precision envelope.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    gt_ids = {g.sample_id for g in gts}
    gt_pts: dict[str, list[np.ndarray]] = {
        g.sample_id: _resampled_class_elements(g.elements, class_id, n_pts) for g in gts
    }
    n_gt = sum(len(v) for v in gt_pts.values())
    if n_gt == 0:
        raise NoGroundTruth(f"no ground-truth elements of class {class_id}")
    ranked = []
    for p in preds:
        if p.sample_id not in gt_ids:
            raise DataError(f"prediction for unknown sample {p.sample_id!r}")
        for idx, (elem, conf) in enumerate(p.elements):
            if elem.class_id == class_id:
                ranked.append((-conf, p.sample_id, idx, resample_uniform(elem, n_pts)))
    ranked.sort(key=lambda t: (t[0], t[1], t[2]))
    if not ranked:
        return 0.0
    claimed: dict[str, list[bool]] = {
        sid: [False] * len(v) for sid, v in gt_pts.items()
    }
    tp = np.zeros(len(ranked))
    for r, (_, sid, _, pts) in enumerate(ranked):
        best_k = -1
        best_d = np.inf
        for k, gpts in enumerate(gt_pts[sid]):
            if claimed[sid][k]:
                continue
            d = chamfer_distance(pts, gpts)
            if d < best_d:
                best_d = d
                best_k = k
        if best_k >= 0 and best_d < tau:
            tp[r] = 1.0
            claimed[sid][best_k] = True
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(ranked) + 1)
    recall = cum_tp / n_gt
    for i in range(len(precision) - 2, -1, -1):
        if precision[i + 1] > precision[i]:
            precision[i] = precision[i + 1]
    ap = 0.0
    prev_r = 0.0
    for i in range(len(ranked)):
        if recall[i] > prev_r:
            ap += (recall[i] - prev_r) * precision[i]
            prev_r = recall[i]
    return float(ap)


def map_score(
    preds: Sequence[PredictionSet],
    gts: Sequence[Sample],
    classes: Sequence[int],
    taus: Sequence[float] = (0.5, 1.0, 1.5),
    n_pts: int = 20,
) -> float:
    """Mean AP over classes and thresholds; GT-less classes are skipped."""
    if len(taus) == 0:
        raise ConfigError("taus must be non-empty")
    aps = []
    for class_id in classes:
        try:
            aps.extend(ap_chamfer(preds, gts, class_id, tau, n_pts) for tau in taus)
        except NoGroundTruth:
            warnings.warn(f"class {class_id} has no ground truth, skipped in mAP")
    if not aps:
        raise NoGroundTruth("no class has any ground-truth elements")
    return float(np.mean(aps))


def frechet_match_distribution(
    pred: PredictionSet,
    gt: Sample,
    delta: float = 10.0,
    n_pts: int = 20,
    conf_min: float | None = None,
    include_unmatched: bool = True,
) -> MatchDistribution:
    """Per-class matched Frechet costs between one prediction set and its
    ground-truth sample.

    Ground-truth elements are the assignment rows, so every one of them
    either contributes its matched cost or (with include_unmatched) the
    penalty delta; surplus predictions are ignored.
    """
    kept = [
        (e, c) for (e, c) in pred.elements if conf_min is None or c >= conf_min
    ]
    gt_prep = prepare_sample(gt, n_pts)
    pred_groups: dict[tuple[int, str], list[np.ndarray]] = {}
    for elem, _ in kept:
        pred_groups.setdefault((elem.class_id, elem.kind), []).append(
            prepare_element(elem, n_pts)
        )
    costs: list[float] = []
    unmatched = 0
    for key in sorted(gt_prep.groups):
        gstack = gt_prep.groups[key].stack
        plist = pred_groups.get(key)
        if plist:
            pstack = np.stack(plist)
            if key[1] == POLYLINE:
                c = _kernels.line_cost_matrix(gstack, pstack)
            else:
                c = _kernels.polygon_cost_matrix(gstack, pstack)
            res = min_cost_assignment(c)
            costs.extend(res.costs)
            leftover = len(gstack) - min(len(gstack), len(pstack))
        else:
            leftover = len(gstack)
        unmatched += leftover
        if include_unmatched:
            costs.extend([delta] * leftover)
    return MatchDistribution(tuple(costs), unmatched, (gt.sample_id,))


def pool_distributions(parts: Sequence[MatchDistribution]) -> MatchDistribution:
    """Concatenate matched-cost distributions (multiset union)."""
    costs: list[float] = []
    ids: list[str] = []
    unmatched = 0
    for part in parts:
        costs.extend(part.costs)
        ids.extend(part.sample_ids)
        unmatched += part.unmatched_gt_count
    return MatchDistribution(tuple(costs), unmatched, tuple(ids))


def m_iqr(dist: MatchDistribution) -> tuple[float, float]:
    """Median and interquartile range of the matched-cost distribution."""
    if len(dist.costs) == 0:
        raise EmptyDistribution("M/IQR of an empty cost distribution")
    costs = np.asarray(dist.costs)
    q1, med, q3 = np.quantile(costs, [0.25, 0.5, 0.75])
    return float(med), float(q3 - q1)


def set_performance(
    preds_by_id: Mapping[str, PredictionSet],
    gts: Sequence[Sample],
    ids: Sequence[str],
    delta: float = 10.0,
    n_pts: int = 20,
    conf_min: float | None = None,
    include_unmatched: bool = True,
) -> tuple[float, float]:
    """M and IQR over the pooled distributions of the given sample ids.

    Samples without a prediction set are scored as fully unmatched.
    """
    if len(ids) == 0:
        raise EmptyDistribution("set performance of an empty id set")
    gt_by_id = {g.sample_id: g for g in gts}
    parts = []
    for sid in sorted(ids):
        if sid not in gt_by_id:
            raise DataError(f"unknown sample id {sid!r} in evaluation set")
        pred = preds_by_id.get(sid, PredictionSet(sid, ()))
        parts.append(
            frechet_match_distribution(
                pred, gt_by_id[sid], delta, n_pts, conf_min, include_unmatched
            )
        )
    return m_iqr(pool_distributions(parts))


def localization_overfitting(m_close_star: float, m_far_star: float) -> float:
    """Relative M drop from the close-star set to the far-star set."""
    if m_close_star == 0:
        raise ZeroBaseline("localization overfitting undefined for zero close-set M")
    return (m_far_star - m_close_star) / m_close_star


def geometric_overfitting(
    bins: SimilarityBins, m_per_bin: Sequence[float | None]
) -> float:
    """Count-weighted least-squares slope of per-bin M over per-bin mean s.

    Empty bins carry zero weight and drop out; their m_per_bin entries may
    be None.
    """
    if len(m_per_bin) != len(bins.bins):
        raise ConfigError(
            f"m_per_bin has {len(m_per_bin)} entries for {len(bins.bins)} bins"
        )
    pts = [
        (mu, m, w)
        for mu, m, w in zip(bins.mu_s, m_per_bin, bins.counts)
        if w > 0
    ]
    if len(pts) < 2:
        raise DegenerateRange("need at least two non-empty bins for a slope")
    for mu, m, _ in pts:
        if mu is None or m is None:
            raise ConfigError("non-empty bin lacks a mean similarity or an M value")
    w = np.array([p[2] for p in pts], dtype=np.float64)
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    p = w / w.sum()
    mu_x = float((p * x).sum())
    mu_y = float((p * y).sum())
    denom = float((p * (x - mu_x) ** 2).sum())
    if denom == 0:
        raise DegenerateRange("all bin mean similarities are identical")
    return float((p * (x - mu_x) * (y - mu_y)).sum() / denom)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1 or len(xv) < 2:
        raise ConfigError("pearson_r needs two equal-length lists of at least 2 values")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateRange("correlation undefined for a constant sequence")
    return float((dx * dy).sum() / (sx * sy))
