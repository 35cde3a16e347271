"""Sample-level similarity via per-class bipartite matching of elements.

A sample is one local vectorized map: the elements around one ego pose,
expressed in that pose's frame. Similarity between two samples matches
same-class, same-kind elements by orientation-searched Frechet cost and
penalizes elements left unmatched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .errors import ConfigError, InvalidCost, KindMismatch
from .geometry import POLYLINE, MapElement, prepare_element


@dataclass(frozen=True)
class Sample:
    """One vectorized map sample.

    Element vertices are in the sample's ego frame; ego_xy/ego_yaw locate
    that frame in the world and feed only geographic distance and plotting.
    fov holds the half-extents of the sensing rectangle (along heading,
    across heading) in meters.
    """

    sample_id: str
    log_id: str
    map_name: str
    ego_xy: NDArray[np.float64]
    ego_yaw: float
    fov: tuple[float, float]
    elements: tuple[MapElement, ...]

    def __post_init__(self) -> None:
        xy = np.asarray(self.ego_xy, dtype=np.float64)
        if xy.shape != (2,):
            raise ConfigError(f"ego_xy must have shape (2,), got {xy.shape}")
        object.__setattr__(self, "ego_xy", xy)
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.fov[0] <= 0 or self.fov[1] <= 0:
            raise ConfigError(f"fov half-extents must be positive, got {self.fov}")


@dataclass(frozen=True)
class AssignmentResult:
    """Optimal bipartite assignment on a cost matrix."""

    pairs: tuple[tuple[int, int], ...]
    costs: tuple[float, ...]
    total_cost: float


@dataclass(frozen=True)
class PreparedGroup:
    """Resampled vertex stack for one (class_id, kind) group of a sample."""

    stack: NDArray[np.float64]
    indices: tuple[int, ...]


@dataclass(frozen=True)
class PreparedSample:
    """A sample with every element resampled and grouped, ready for matching."""

    sample_id: str
    groups: Mapping[tuple[int, str], PreparedGroup]


def prepare_sample(sample: Sample, n_pts: int = 20) -> PreparedSample:
    """Resample all elements once and group them by (class_id, kind)."""
    buckets: dict[tuple[int, str], list[tuple[int, NDArray[np.float64]]]] = {}
    for idx, elem in enumerate(sample.elements):
        pts = prepare_element(elem, n_pts)
        buckets.setdefault((elem.class_id, elem.kind), []).append((idx, pts))
    groups = {}
    for key, items in buckets.items():
        stack = np.stack([pts for _, pts in items])
        groups[key] = PreparedGroup(stack, tuple(idx for idx, _ in items))
    return PreparedSample(sample.sample_id, groups)


def cost_matrix(
    elems_a: Sequence[MapElement], elems_b: Sequence[MapElement], n_pts: int = 20
) -> NDArray[np.float64]:
    """Pairwise orientation-searched Frechet costs between two element lists.

    All elements must share one kind; callers group by class and kind first.
    Entry [i, j] equals element_frechet(elems_a[i], elems_b[j], n_pts).
    """
    if len(elems_a) == 0 or len(elems_b) == 0:
        return np.empty((len(elems_a), len(elems_b)))
    kinds = {e.kind for e in elems_a} | {e.kind for e in elems_b}
    if len(kinds) != 1:
        raise KindMismatch(f"cost matrix needs a single element kind, got {sorted(kinds)}")
    stack_a = np.stack([prepare_element(e, n_pts) for e in elems_a])
    stack_b = np.stack([prepare_element(e, n_pts) for e in elems_b])
    if kinds.pop() == POLYLINE:
        return _kernels.line_cost_matrix(stack_a, stack_b)
    return _kernels.polygon_cost_matrix(stack_a, stack_b)


def min_cost_assignment(cost: NDArray[np.float64]) -> AssignmentResult:
    """Minimum-total-cost bipartite assignment (exact, not greedy).

    Matches min(n_rows, n_cols) pairs; returns them sorted by row index.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise InvalidCost(f"cost matrix must be 2D, got shape {c.shape}")
    if c.size == 0:
        return AssignmentResult((), (), 0.0)
    if np.isnan(c).any():
        raise InvalidCost("cost matrix contains NaN")
    if (c < 0).any():
        raise InvalidCost("cost matrix contains negative entries")
    rows, cols = linear_sum_assignment(c)
    picked = c[rows, cols]
    pairs = tuple((int(r), int(col)) for r, col in zip(rows, cols))
    return AssignmentResult(pairs, tuple(float(v) for v in picked), float(picked.sum()))


def similarity_from_prepared(
    prep_a: PreparedSample, prep_b: PreparedSample, delta: float = 10.0
) -> float:
    """Sample similarity on pre-resampled groups; see sample_similarity."""
    if delta <= 0:
        raise ConfigError(f"unmatched penalty delta must be positive, got {delta}")
    # canonical evaluation order makes the function exactly symmetric
    if prep_b.sample_id < prep_a.sample_id:
        prep_a, prep_b = prep_b, prep_a
    matched_cost = 0.0
    n_matched = 0
    n_unmatched = 0
    for key in sorted(set(prep_a.groups) | set(prep_b.groups)):
        ga = prep_a.groups.get(key)
        gb = prep_b.groups.get(key)
        na = len(ga.stack) if ga is not None else 0
        nb = len(gb.stack) if gb is not None else 0
        if na > 0 and nb > 0:
            if key[1] == POLYLINE:
                c = _kernels.line_cost_matrix(ga.stack, gb.stack)
            else:
                c = _kernels.polygon_cost_matrix(ga.stack, gb.stack)
            matched_cost += min_cost_assignment(c).total_cost
            m = min(na, nb)
            n_matched += m
            n_unmatched += na + nb - 2 * m
        else:
            n_unmatched += na + nb
    denom = n_matched + n_unmatched
    if denom == 0:
        return 0.0
    return (matched_cost + n_unmatched * delta) / denom


def sample_similarity(
    a: Sample, b: Sample, delta: float = 10.0, n_pts: int = 20
) -> float:
    """Geometric similarity cost between two samples (lower is more similar).

    Per (class, kind) group, elements are matched by minimum-cost bipartite
    assignment on orientation-searched Frechet costs; every unmatched element
    adds the fixed penalty delta. The result is the total cost divided by the
    number of matched plus unmatched elements. Exactly symmetric, zero for
    identical samples, and zero when both samples are empty.
    """
    return similarity_from_prepared(
        prepare_sample(a, n_pts), prepare_sample(b, n_pts), delta
    )


def geo_distance(a: Sample, b: Sample) -> float:
    """Euclidean distance between ego positions, or inf across maps.

    Samples from different maps live in unrelated world frames, so their
    geographic distance is reported as math.inf.
    """
    if a.map_name != b.map_name:
        return math.inf
    dx = a.ego_xy[0] - b.ego_xy[0]
    dy = a.ego_xy[1] - b.ego_xy[1]
    return math.hypot(dx, dy)
