"""Rotation/translation-invariant sample similarity via candidate alignments.

Candidate rigid transforms come from aligning individual cross-sample element
pairs (best Procrustes over vertex orderings, ranked by the Frechet cost of
the aligned pair). Each candidate maps the second sample onto the first; the
plain similarity is then evaluated inside the overlapping field of view and
penalized linearly for low overlap, and the best candidate wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, EmptyTrainingSet
from .geometry import (
    POLYGON,
    POLYLINE,
    MapElement,
    RigidTransform,
    element_frechet,
    prepare_element,
    resample_uniform,
)
from .matching import (
    PreparedGroup,
    PreparedSample,
    Sample,
    similarity_from_prepared,
)


@dataclass(frozen=True)
class CandidateTransform:
    """One rigid alignment candidate derived from a single element pair."""

    transform: RigidTransform
    source: tuple[int, int, int]
    aligned_pair_frechet: float


@dataclass(frozen=True)
class OverlapRegion:
    """Convex overlap polygon between two fields of view and its area ratio."""

    polygon: NDArray[np.float64]
    ratio: float


def fov_rectangle(sample: Sample) -> NDArray[np.float64]:
    """Counterclockwise corner loop of the sample's sensing rectangle."""
    hl, hw = sample.fov
    return np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])


def _polygon_area(pts: NDArray[np.float64]) -> float:
    if len(pts) < 3:
        return 0.0
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def _clip_segment_intersection(s, e, c1, c2):
    edge = c2 - c1
    d = e - s
    denom = edge[0] * d[1] - edge[1] * d[0]
    num = edge[0] * (c1[1] - s[1]) - edge[1] * (c1[0] - s[0])
    t = num / denom
    return s + t * d


def convex_clip_polygon(
    subject: NDArray[np.float64], clip: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Intersection of a polygon with a convex CCW clip polygon.

    Classic edge-by-edge clipping; returns an empty (0, 2) array when the
    polygons do not overlap.
    """
    output = [np.asarray(p, dtype=np.float64) for p in subject]
    m = len(clip)
    for k in range(m):
        c1 = clip[k]
        c2 = clip[(k + 1) % m]
        edge = c2 - c1
        if not output:
            break
        # ~1 nm tolerance keeps vertices produced by an earlier clip (exactly
        # on an edge up to float noise) classified as inside, so re-clipping
        # already-clipped geometry reproduces it bit for bit.
        eps = 1e-9 * math.hypot(edge[0], edge[1])
        pts = output
        output = []
        prev = pts[-1]
        prev_in = edge[0] * (prev[1] - c1[1]) - edge[1] * (prev[0] - c1[0]) >= -eps
        for cur in pts:
            cur_in = edge[0] * (cur[1] - c1[1]) - edge[1] * (cur[0] - c1[0]) >= -eps
            if cur_in:
                if not prev_in:
                    output.append(_clip_segment_intersection(prev, cur, c1, c2))
                output.append(cur)
            elif prev_in:
                output.append(_clip_segment_intersection(prev, cur, c1, c2))
            prev, prev_in = cur, cur_in
    if len(output) < 3:
        return np.empty((0, 2))
    out = np.array(output)
    keep = np.ones(len(out), dtype=bool)
    keep[1:] = (np.diff(out, axis=0) != 0.0).any(axis=1)
    out = out[keep]
    if len(out) > 1 and (out[0] == out[-1]).all():
        out = out[:-1]
    return out if len(out) >= 3 else np.empty((0, 2))


def clip_polyline(
    pts: NDArray[np.float64], clip: NDArray[np.float64]
) -> list[NDArray[np.float64]]:
    """Pieces of a polyline inside a convex CCW polygon."""
    pieces: list[list[np.ndarray]] = []
    open_piece = False
    m = len(clip)
    edges = [(clip[k], clip[(k + 1) % m]) for k in range(m)]
    for s, e in zip(pts[:-1], pts[1:]):
        d = e - s
        t_lo, t_hi = 0.0, 1.0
        for c1, c2 in edges:
            ex, ey = c2[0] - c1[0], c2[1] - c1[1]
            f0 = ex * (s[1] - c1[1]) - ey * (s[0] - c1[0])
            slope = ex * d[1] - ey * d[0]
            if slope == 0.0:
                # parallel segment: ~1 nm tolerance keeps on-edge runs inside
                if f0 < -1e-9 * math.hypot(ex, ey):
                    t_lo, t_hi = 1.0, 0.0
                    break
            else:
                t_cross = -f0 / slope
                if slope > 0.0:
                    t_lo = max(t_lo, t_cross)
                else:
                    t_hi = min(t_hi, t_cross)
                if t_lo > t_hi:
                    break
        if t_lo > t_hi:
            open_piece = False
            continue
        # snap float-noise crossings and reuse the exact endpoints so
        # reclipping already-clipped output reproduces it bit for bit
        if t_lo < 1e-12:
            t_lo = 0.0
        if t_hi > 1.0 - 1e-12:
            t_hi = 1.0
        a = s if t_lo == 0.0 else s + t_lo * d
        b = e if t_hi == 1.0 else s + t_hi * d
        if open_piece and t_lo == 0.0:
            pieces[-1].append(b)
        else:
            pieces.append([a, b])
        open_piece = t_hi == 1.0
    return [np.array(p) for p in pieces]


def overlap_region(v: Sample, t: Sample, transform: RigidTransform) -> OverlapRegion:
    """Overlap between v's FOV and t's FOV mapped through the transform."""
    v_rect = fov_rectangle(v)
    t_rect = transform.apply(fov_rectangle(t))
    poly = convex_clip_polygon(t_rect, v_rect)
    area_v = _polygon_area(v_rect)
    ratio = _polygon_area(poly) / area_v if area_v > 0 else 0.0
    return OverlapRegion(poly, min(max(ratio, 0.0), 1.0))


def clip_to_region(
    elements: Sequence[MapElement],
    region: OverlapRegion,
    min_length: float = 0.1,
    min_area: float = 0.01,
) -> list[MapElement]:
    """Clip elements to the overlap polygon, dropping outside or tiny remains.

    A polyline crossing the region boundary several times yields one element
    per inside piece.
    """
    if len(region.polygon) < 3:
        return []
    out: list[MapElement] = []
    for elem in elements:
        if elem.kind == POLYLINE:
            for piece in clip_polyline(elem.vertices, region.polygon):
                seg = np.diff(piece, axis=0)
                if float(np.hypot(seg[:, 0], seg[:, 1]).sum()) >= min_length:
                    out.append(MapElement(elem.class_id, POLYLINE, piece))
        else:
            ring = elem.vertices
            if len(ring) > 1 and (ring[0] == ring[-1]).all():
                ring = ring[:-1]
            clipped = convex_clip_polygon(ring, region.polygon)
            if len(clipped) >= 3 and _polygon_area(clipped) >= min_area:
                out.append(MapElement(elem.class_id, POLYGON, clipped))
    return out


def _readings(pts: NDArray[np.float64], kind: str) -> NDArray[np.float64]:
    """All vertex orderings searched for alignment: stack (r, p, 2)."""
    if kind == POLYLINE:
        return np.stack([pts, pts[::-1]])
    p = len(pts)
    idx = np.arange(p)
    rolls = (np.arange(p)[:, None] + idx[None, :]) % p
    rev = (np.arange(p)[:, None] - idx[None, :]) % p
    return pts[np.concatenate([rolls, rev], axis=0)]


def _best_procrustes(
    dst: NDArray[np.float64], readings: NDArray[np.float64]
) -> list[RigidTransform]:
    """Rigid transforms of every best-fitting reading onto the target points.

    Readings whose fit quality ties the best one (up to float noise) each
    yield a transform: a straight segment read in either direction is the
    canonical case, where both orderings fit exactly but imply opposite
    rotations. Returning all tied fits lets the caller pick by total cost.
    """
    mu_d = dst.mean(axis=0)
    dc = dst - mu_d
    mu_r = readings.mean(axis=1)
    rc = readings - mu_r[:, None, :]
    dot = np.einsum("ij,rij->r", dc, rc)
    cross = np.einsum("i,ri->r", dc[:, 1], rc[:, :, 0]) - np.einsum(
        "i,ri->r", dc[:, 0], rc[:, :, 1]
    )
    gain = dot * dot + cross * cross
    best = float(gain.max())
    if best == 0.0:
        return [RigidTransform(np.eye(2), mu_d - mu_r[0])]
    out: list[RigidTransform] = []
    for k in np.nonzero(gain >= best * (1.0 - 1e-9))[0]:
        theta = math.atan2(cross[k], dot[k])
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        out.append(RigidTransform(rot, mu_d - rot @ mu_r[k]))
    return out


def candidate_transforms(
    v: Sample, t: Sample, k_top: int = 10, n_pts: int = 20
) -> list[CandidateTransform]:
    """Alignment candidates from all same-class, same-kind element pairs.

    For each pair the vertex orderings with the best rigid fit are kept
    (orderings that tie each contribute), the fitted transforms map the t
    element onto the v element, and candidates are ranked by the Frechet
    cost of the aligned pair. Near-identical transforms (angle within 1e-3
    rad, translation within 1e-2 m) are deduplicated before the k_top best
    are returned.
    """
    if k_top < 1:
        raise ConfigError(f"k_top must be at least 1, got {k_top}")
    scored: list[CandidateTransform] = []
    for vi, ve in enumerate(v.elements):
        v_pts = resample_uniform(ve, n_pts)
        for ti, te in enumerate(t.elements):
            if te.class_id != ve.class_id or te.kind != ve.kind:
                continue
            t_pts = resample_uniform(te, n_pts)
            for transform in _best_procrustes(v_pts, _readings(t_pts, te.kind)):
                aligned = MapElement(
                    te.class_id, te.kind, transform.apply(te.vertices)
                )
                score = element_frechet(ve, aligned, n_pts)
                scored.append(
                    CandidateTransform(transform, (ve.class_id, vi, ti), score)
                )
    scored.sort(key=lambda c: (c.aligned_pair_frechet, c.source))
    kept: list[CandidateTransform] = []
    for cand in scored:
        dup = False
        for other in kept:
            d_angle = abs(cand.transform.angle - other.transform.angle)
            d_angle = min(d_angle, 2 * math.pi - d_angle)
            d_tr = float(
                np.hypot(*(cand.transform.translation - other.transform.translation))
            )
            if d_angle <= 1e-3 and d_tr <= 1e-2:
                dup = True
                break
        if not dup:
            kept.append(cand)
            if len(kept) == k_top:
                break
    return kept


def _prepared_from_elements(
    sample_id: str, elements: Sequence[MapElement], n_pts: int
) -> PreparedSample:
    buckets: dict[tuple[int, str], list[np.ndarray]] = {}
    for elem in elements:
        buckets.setdefault((elem.class_id, elem.kind), []).append(
            prepare_element(elem, n_pts)
        )
    groups = {
        key: PreparedGroup(np.stack(pts), tuple(range(len(pts))))
        for key, pts in buckets.items()
    }
    return PreparedSample(sample_id, groups)


def sim_topo(
    v: Sample,
    t: Sample,
    k_top: int = 10,
    lam: float = 10.0,
    delta: float = 10.0,
    n_pts: int = 20,
) -> float:
    """Alignment-invariant similarity cost between two samples.

    Every candidate transform is scored by the plain similarity of both
    samples clipped to the overlapping field of view, plus lam * (1 - r)
    where r is the overlap ratio; the smallest candidate score wins. With no
    alignable element pairs at all the no-overlap convention delta + lam is
    returned.
    """
    if lam < 0:
        raise ConfigError(f"lam must be non-negative, got {lam}")
    candidates = candidate_transforms(v, t, k_top, n_pts)
    if not candidates:
        return delta + lam
    transforms = [c.transform for c in candidates]
    transforms.append(RigidTransform.identity())
    best = math.inf
    for transform in transforms:
        region = overlap_region(v, t, transform)
        v_clip = clip_to_region(v.elements, region)
        t_moved = [
            MapElement(e.class_id, e.kind, transform.apply(e.vertices))
            for e in t.elements
        ]
        t_clip = clip_to_region(t_moved, region)
        sim_val = similarity_from_prepared(
            _prepared_from_elements(v.sample_id, v_clip, n_pts),
            _prepared_from_elements(t.sample_id, t_clip, n_pts),
            delta,
        )
        value = sim_val + lam * (1.0 - region.ratio)
        if value < best:
            best = value
    return best


def s_topo(
    v: Sample,
    train_samples: Sequence[Sample],
    k_top: int = 10,
    lam: float = 10.0,
    delta: float = 10.0,
    n_pts: int = 20,
) -> tuple[float, str]:
    """Minimum sim_topo over the training set, with the nearest sample id.

    Ties break toward the smallest training sample id.
    """
    if len(train_samples) == 0:
        raise EmptyTrainingSet("topological statistics need a non-empty training set")
    best = math.inf
    best_id = ""
    for t in sorted(train_samples, key=lambda s: s.sample_id):
        value = sim_topo(v, t, k_top, lam, delta, n_pts)
        if value < best:
            best = value
            best_id = t.sample_id
    return best, best_id
