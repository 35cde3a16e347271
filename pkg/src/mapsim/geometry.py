"""Core 2D geometry: map elements, resampling, curve distances, alignment.

Distances operate on resampled vertex arrays so that every element is
compared at the same resolution regardless of how densely it was digitized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import DataError, DegenerateElement, EmptyGeometry, KindMismatch

POLYLINE = "polyline"
POLYGON = "polygon"
_KINDS = (POLYLINE, POLYGON)


class Point2(NamedTuple):
    """A 2D point in meters."""

    x: float
    y: float


@dataclass(frozen=True)
class MapElement:
    """One vectorized map element: a class label plus an open or closed curve."""

    class_id: int
    kind: str
    vertices: NDArray[np.float64]

    def __post_init__(self) -> None:
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise DataError(f"vertices must have shape (n, 2), got {verts.shape}")
        if verts.shape[0] == 0:
            raise EmptyGeometry("element has no vertices")
        if not np.isfinite(verts).all():
            raise DataError("element vertices contain NaN or infinity")
        if self.kind not in _KINDS:
            raise DataError(f"unknown element kind {self.kind!r}")
        object.__setattr__(self, "vertices", verts)


@dataclass(frozen=True)
class RigidTransform:
    """A proper rigid motion of the plane: rotation then translation."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (2, 2) or tr.shape != (2,):
            raise DataError("rigid transform needs a (2, 2) rotation and (2,) translation")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(2), np.zeros(2))

    @property
    def angle(self) -> float:
        """Rotation angle in radians, in (-pi, pi]."""
        return float(np.arctan2(self.rotation[1, 0], self.rotation[0, 0]))

    def apply(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def _dedup_consecutive(verts: NDArray[np.float64]) -> NDArray[np.float64]:
    """Drop consecutive duplicate vertices (zero-length segments)."""
    if len(verts) <= 1:
        return verts
    keep = np.ones(len(verts), dtype=bool)
    keep[1:] = (np.diff(verts, axis=0) != 0.0).any(axis=1)
    return verts[keep]


def resample_uniform(element: MapElement, n_pts: int) -> NDArray[np.float64]:
    """Resample an element to n_pts vertices spaced uniformly by arc length.

    Polylines keep both endpoints exactly. Polygons are treated as closed
    loops: the vertex reading is canonicalized first so the same ring
    digitized from any start or direction resamples identically, then the
    n_pts samples divide the perimeter into equal arcs without duplicating
    the closing point.
    """
    if n_pts < 2:
        raise DataError(f"n_pts must be at least 2, got {n_pts}")
    verts = _dedup_consecutive(element.vertices)
    if element.kind == POLYGON:
        if len(element.vertices) < 3:
            raise DegenerateElement("polygon needs at least 3 vertices")
        # drop an explicitly repeated closing vertex, then close the loop
        if len(verts) > 1 and (verts[0] == verts[-1]).all():
            verts = verts[:-1]
        verts = canonical_polygon(verts)
        ring = np.vstack([verts, verts[:1]])
    else:
        ring = verts
    if len(ring) < 2:
        raise DegenerateElement("element collapses to a single point")
    seg = np.linalg.norm(np.diff(ring, axis=0), axis=1)
    total = float(seg.sum())
    if total == 0.0:
        raise DegenerateElement("element has zero arc length")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if element.kind == POLYGON:
        targets = np.arange(n_pts) * (total / n_pts)
    else:
        targets = np.linspace(0.0, total, n_pts)
    xs = np.interp(targets, cum, ring[:, 0])
    ys = np.interp(targets, cum, ring[:, 1])
    out = np.column_stack([xs, ys])
    if element.kind == POLYLINE:
        # guard the endpoints against interpolation rounding
        out[0] = ring[0]
        out[-1] = ring[-1]
    return out


def _signed_area(pts: NDArray[np.float64]) -> float:
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def canonical_polygon(pts: NDArray[np.float64]) -> NDArray[np.float64]:
    """Rotate/flip a closed vertex loop into a canonical reading.

    Orientation is made counterclockwise (positive signed area) and the
    reading starts at the lexicographically smallest vertex, so congruent
    loops digitized differently map to the same array.
    """
    if _signed_area(pts) < 0.0:
        pts = pts[::-1]
    order = np.lexsort((np.arange(len(pts)), pts[:, 1], pts[:, 0]))
    return np.ascontiguousarray(np.roll(pts, -int(order[0]), axis=0))


def prepare_element(element: MapElement, n_pts: int) -> NDArray[np.float64]:
    """Resample an element and, for polygons, canonicalize the reading."""
    pts = resample_uniform(element, n_pts)
    if element.kind == POLYGON:
        pts = canonical_polygon(pts)
    return pts


def _pairwise_dist(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def chamfer_distance(pts_a: NDArray[np.float64], pts_b: NDArray[np.float64]) -> float:
    """Symmetric Chamfer distance: mean nearest-neighbour gap, both ways.

    Exactly symmetric in its arguments.
    """
    a = np.asarray(pts_a, dtype=np.float64)
    b = np.asarray(pts_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise EmptyGeometry("chamfer distance of an empty point set")
    d = _pairwise_dist(a, b)
    return 0.5 * (float(d.min(axis=1).mean()) + float(d.min(axis=0).mean()))


def discrete_frechet(pts_a: NDArray[np.float64], pts_b: NDArray[np.float64]) -> float:
    """Discrete Frechet distance between two vertex sequences as given.

    No orientation search is performed; use element_frechet for that.
    """
    a = np.asarray(pts_a, dtype=np.float64)
    b = np.asarray(pts_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise EmptyGeometry("Frechet distance of an empty vertex sequence")
    return float(_kernels.dfd_from_matrix(_pairwise_dist(a, b)))


def element_frechet(elem_a: MapElement, elem_b: MapElement, n_pts: int = 20) -> float:
    """Orientation-searched Frechet distance between two same-kind elements.

    Polylines are compared in both traversal directions; polygons over all
    cyclic starts and both directions of one canonical side. The search is
    arranged so the result is exactly symmetric in the two elements.
    """
    if elem_a.kind != elem_b.kind:
        raise KindMismatch(f"cannot compare {elem_a.kind} with {elem_b.kind}")
    a = prepare_element(elem_a, n_pts)[None]
    b = prepare_element(elem_b, n_pts)[None]
    if elem_a.kind == POLYLINE:
        return float(_kernels.line_cost_matrix(a, b)[0, 0])
    return float(_kernels.polygon_cost_matrix(a, b)[0, 0])


def procrustes_rigid(
    src_pts: NDArray[np.float64], dst_pts: NDArray[np.float64]
) -> RigidTransform:
    """Best proper rigid motion (no scaling, no reflection) of src onto dst.

    Minimizes the summed squared distances between corresponding points.
    When either point set is fully coincident any rotation is optimal and the
    identity rotation is returned.
    """
    src = np.asarray(src_pts, dtype=np.float64)
    dst = np.asarray(dst_pts, dtype=np.float64)
    if src.shape != dst.shape:
        raise DataError(f"point sets differ in shape: {src.shape} vs {dst.shape}")
    if src.ndim != 2 or src.shape[1] != 2 or len(src) == 0:
        raise EmptyGeometry("rigid alignment needs non-empty (n, 2) point sets")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    sc = src - mu_s
    dc = dst - mu_d
    dot = float((dc * sc).sum())
    cross = float((dc[:, 1] * sc[:, 0] - dc[:, 0] * sc[:, 1]).sum())
    if dot == 0.0 and cross == 0.0:
        rot = np.eye(2)
    else:
        theta = np.arctan2(cross, dot)
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
    return RigidTransform(rot, mu_d - rot @ mu_s)
