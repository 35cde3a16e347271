"""Alignment-invariant similarity: clipping, candidates, and the overlap penalty."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mapsim import (
    ConfigError,
    MapElement,
    RigidTransform,
    candidate_transforms,
    clip_to_region,
    overlap_region,
    s_topo,
    sim_topo,
)
from mapsim.topo_sim import clip_polyline, convex_clip_polygon

from conftest import make_line, make_polygon, make_sample
from oracles import (
    clipped_polyline_length_oracle,
    polygon_overlap_oracle,
    rotated_rect_overlap_oracle,
)


def rect(hl: float, hw: float) -> np.ndarray:
    return np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])


def rotation(theta: float) -> RigidTransform:
    c, s = math.cos(theta), math.sin(theta)
    return RigidTransform(np.array([[c, -s], [s, c]]), np.zeros(2))


def rotate_pts(pts: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return pts @ np.array([[c, -s], [s, c]]).T


class TestPolygonClip:
    def test_area_matches_shapely(self, rng):
        for _ in range(40):
            theta = rng.uniform(0, 2 * math.pi)
            base = rect(10.0, 5.0)
            other = rotate_pts(rect(8.0, 6.0), theta) + rng.uniform(-4, 4, 2)
            clipped = convex_clip_polygon(base, other)
            expected = polygon_overlap_oracle(base, other)
            got = 0.0
            if len(clipped) >= 3:
                x, y = clipped[:, 0], clipped[:, 1]
                got = 0.5 * abs(
                    float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
                )
            assert got == pytest.approx(expected, abs=1e-9)

    def test_disjoint_is_empty(self):
        out = convex_clip_polygon(rect(1.0, 1.0) + 100.0, rect(1.0, 1.0))
        assert len(out) == 0

    def test_contained_is_unchanged_area(self):
        inner = rect(1.0, 1.0)
        out = convex_clip_polygon(inner, rect(10.0, 10.0))
        assert polygon_overlap_oracle(out, inner) == pytest.approx(4.0, abs=1e-12)


class TestPolylineClip:
    def test_length_matches_shapely(self, rng):
        window = rect(6.0, 4.0)
        for _ in range(60):
            pts = rng.uniform(-10, 10, (int(rng.integers(2, 7)), 2))
            pieces = clip_polyline(pts, window)
            total = sum(
                float(np.sqrt((np.diff(p, axis=0) ** 2).sum(axis=1)).sum())
                for p in pieces
            )
            expected = clipped_polyline_length_oracle(pts, window)
            assert total == pytest.approx(expected, abs=1e-9)

    def test_inside_line_untouched(self):
        pts = np.array([[-1.0, 0.0], [1.0, 0.5]])
        pieces = clip_polyline(pts, rect(5.0, 5.0))
        assert len(pieces) == 1
        np.testing.assert_allclose(pieces[0], pts)

    def test_crossing_line_split_into_pieces(self):
        # enters, exits, re-enters the window
        pts = np.array([[-8.0, 0.0], [0.0, 0.0], [0.0, 8.0], [5.0, 8.0], [5.0, 0.0]])
        pieces = clip_polyline(pts, rect(6.0, 4.0))
        assert len(pieces) == 2


class TestOverlapRegion:
    def test_pure_rotation_matches_closed_form(self):
        v = make_sample("v", [], fov=(30.0, 15.0))
        t = make_sample("t", [], fov=(30.0, 15.0))
        for theta in (math.radians(15), math.radians(45), math.radians(90)):
            region = overlap_region(v, t, rotation(theta))
            expected = rotated_rect_overlap_oracle(30.0, 15.0, theta)
            assert region.ratio == pytest.approx(expected, abs=1e-9)

    def test_identity_full_overlap(self):
        v = make_sample("v", [], fov=(30.0, 15.0))
        region = overlap_region(v, v, RigidTransform.identity())
        assert region.ratio == pytest.approx(1.0, abs=1e-12)

    def test_quarter_turn_exact_half(self):
        v = make_sample("v", [], fov=(30.0, 15.0))
        region = overlap_region(v, v, rotation(math.pi / 2))
        # 30x30 core over the 60x30 rectangle
        assert region.ratio == pytest.approx(0.5, abs=1e-12)


class TestCandidateTransforms:
    def test_recovers_planted_rotation(self):
        elem = make_line([[18.0, -2.0], [22.0, 1.0], [26.0, 2.0]])
        theta = math.radians(30)
        rotated = MapElement(0, "polyline", rotate_pts(elem.vertices, theta))
        v = make_sample("v", [elem], fov=(30.0, 15.0))
        t = make_sample("t", [rotated], fov=(30.0, 15.0))
        cands = candidate_transforms(v, t, k_top=10, n_pts=20)
        assert cands, "no candidates generated"
        best = cands[0]
        got_angle = math.atan2(best.transform.rotation[1, 0], best.transform.rotation[0, 0])
        assert got_angle == pytest.approx(-theta, abs=1e-9)
        assert best.aligned_pair_frechet <= 1e-9

    def test_classes_do_not_mix(self):
        a = make_line([[0, 0], [10, 0]], class_id=0)
        b = make_line([[0, 0], [10, 0]], class_id=1)
        v = make_sample("v", [a])
        t = make_sample("t", [b])
        assert candidate_transforms(v, t, k_top=10, n_pts=20) == []

    def test_k_top_truncates(self, rng):
        elems_v = [make_line([[k, 0], [k + 3, 1]]) for k in range(6)]
        elems_t = [make_line([[k, 2], [k + 3, 3]]) for k in range(6)]
        v = make_sample("v", elems_v)
        t = make_sample("t", elems_t)
        cands = candidate_transforms(v, t, k_top=4, n_pts=10)
        assert len(cands) <= 4
        scores = [c.aligned_pair_frechet for c in cands]
        assert scores == sorted(scores)

    def test_invalid_k_top_rejected(self):
        v = make_sample("v", [make_line([[0, 0], [1, 0]])])
        with pytest.raises(ConfigError):
            candidate_transforms(v, v, k_top=0, n_pts=10)


class TestSimTopo:
    def test_identical_samples_zero(self):
        elem = make_line([[5.0, 1.0], [12.0, -2.0]])
        v = make_sample("v", [elem], fov=(30.0, 15.0))
        t = make_sample("t", [elem], fov=(30.0, 15.0))
        assert sim_topo(v, t, 10, 10.0, 10.0, 20) == pytest.approx(0.0, abs=1e-12)

    def test_pure_rotation_costs_only_overlap_penalty(self):
        lam = 10.0
        for deg in (15.0, 45.0, 90.0):
            theta = math.radians(deg)
            elem = make_line([[10.0, -2.0], [12.5, 0.5], [14.0, 2.0]])
            rotated = MapElement(0, "polyline", rotate_pts(elem.vertices, theta))
            v = make_sample("v", [elem], fov=(30.0, 15.0))
            t = make_sample("t", [rotated], fov=(30.0, 15.0))
            r = rotated_rect_overlap_oracle(30.0, 15.0, theta)
            got = sim_topo(v, t, 10, lam, 10.0, 20)
            assert got == pytest.approx(lam * (1.0 - r), abs=1e-6), f"theta={deg}"

    def test_no_candidates_costs_delta_plus_lambda(self):
        v = make_sample("v", [make_line([[0, 0], [5, 0]], class_id=0)])
        t = make_sample("t", [make_line([[0, 0], [5, 0]], class_id=1)])
        assert sim_topo(v, t, 10, 7.0, 9.0, 20) == 16.0

    def test_never_exceeds_empty_pool_cost(self, rng):
        from conftest import random_sample

        for k in range(10):
            v = random_sample(rng, f"v{k}")
            t = random_sample(rng, f"t{k}")
            assert sim_topo(v, t, 10, 10.0, 10.0, 12) <= 20.0 + 1e-9


class TestSTopo:
    def test_scans_training_set(self):
        elem = make_line([[5.0, 1.0], [12.0, -2.0]])
        v = make_sample("v", [elem], fov=(30.0, 15.0))
        t_far = make_sample(
            "t0", [make_line([[0.0, 5.0], [3.0, 9.0]])], fov=(30.0, 15.0)
        )
        t_same = make_sample("t1", [elem], fov=(30.0, 15.0))
        value, nearest = s_topo(v, [t_far, t_same], 10, 10.0, 10.0, 20)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert nearest == "t1"
