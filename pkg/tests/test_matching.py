"""Bipartite matching and sample similarity against brute force and hand math."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from mapsim import (
    InvalidCost,
    MapElement,
    cost_matrix,
    element_frechet,
    geo_distance,
    min_cost_assignment,
    sample_similarity,
)
from mapsim.matching import prepare_sample, similarity_from_prepared

from conftest import make_line, make_polygon, make_sample, random_sample
from oracles import assignment_oracle


class TestAssignment:
    def test_matches_permutation_brute_force(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 6))
            cost = rng.uniform(0, 10, (n, n))
            result = min_cost_assignment(cost)
            assert result.total_cost == pytest.approx(assignment_oracle(cost), abs=1e-12)

    def test_rectangular_matches_min_side(self, rng):
        cost = rng.uniform(0, 5, (3, 5))
        result = min_cost_assignment(cost)
        assert len(result.pairs) == 3
        best = min(
            sum(cost[i, c] for i, c in enumerate(cols))
            for cols in itertools.permutations(range(5), 3)
        )
        assert result.total_cost == pytest.approx(best, abs=1e-12)

    def test_empty_matrix(self):
        result = min_cost_assignment(np.empty((0, 3)))
        assert result.pairs == ()
        assert result.total_cost == 0.0

    def test_invalid_costs_rejected(self):
        with pytest.raises(InvalidCost):
            min_cost_assignment(np.array([[1.0, np.nan], [0.0, 2.0]]))
        with pytest.raises(InvalidCost):
            min_cost_assignment(np.array([[-0.5]]))


class TestCostMatrix:
    def test_entries_are_element_costs(self, rng):
        a = [make_line([[0, 0], [5, 0]]), make_line([[0, 2], [5, 2]])]
        b = [make_line([[0, 1], [5, 1]])]
        m = cost_matrix(a, b, 10)
        assert m.shape == (2, 1)
        assert m[0, 0] == element_frechet(a[0], b[0], 10)
        assert m[1, 0] == element_frechet(a[1], b[0], 10)


class TestSampleSimilarity:
    def test_hand_value_matched_and_unmatched(self):
        # two dividers, one matches at cost 1, the surplus one costs delta
        v = make_sample("v", [make_line([[0, 0], [10, 0]]), make_line([[0, 6], [10, 6]])])
        t = make_sample("t", [make_line([[0, 1], [10, 1]])])
        delta = 10.0
        expected = (1.0 + delta) / 2.0
        assert sample_similarity(v, t, delta, 20) == pytest.approx(expected, abs=1e-12)

    def test_identity_zero(self, rng):
        for k in range(20):
            s = random_sample(rng, f"s{k}")
            assert sample_similarity(s, s, 10.0, 20) == 0.0

    def test_exact_swap_symmetry(self, rng):
        for k in range(60):
            a = random_sample(rng, f"a{k}")
            b = random_sample(rng, f"b{k}")
            assert sample_similarity(a, b, 10.0, 20) == sample_similarity(b, a, 10.0, 20)

    def test_translation_offset_is_exact_for_single_divider(self):
        # a vertical 8 m segment against its translate: the forward reading
        # realizes exactly the offset norm, and the reversed reading is
        # always at least as expensive
        for cx, cy in [(1.0, 0.0), (3.0, 4.0), (0.0, 2.0), (100.0, 7.0)]:
            v = make_sample("v", [make_line([[0, -4], [0, 4]])], fov=(200.0, 200.0))
            t = make_sample(
                "t", [make_line([[cx, -4 + cy], [cx, 4 + cy]])], fov=(200.0, 200.0)
            )
            assert sample_similarity(v, t, 10.0, 20) == pytest.approx(
                math.hypot(cx, cy), abs=1e-12
            )

    def test_classes_never_cross_match(self):
        # same geometry, different class: both sides fully unmatched
        v = make_sample("v", [make_line([[0, 0], [10, 0]], class_id=0)])
        t = make_sample("t", [make_line([[0, 0], [10, 0]], class_id=1)])
        assert sample_similarity(v, t, 10.0, 20) == pytest.approx(10.0, abs=1e-12)

    def test_kinds_never_cross_match(self):
        v = make_sample("v", [make_polygon([[0, 0], [4, 0], [4, 4]], class_id=0)])
        t = make_sample("t", [make_line([[0, 0], [4, 0]], class_id=0)])
        assert sample_similarity(v, t, 10.0, 20) == pytest.approx(10.0, abs=1e-12)

    def test_empty_against_empty(self):
        v = make_sample("v", [])
        t = make_sample("t", [])
        assert sample_similarity(v, t, 10.0, 20) == 0.0

    def test_empty_against_full_pays_delta(self):
        v = make_sample("v", [])
        t = make_sample("t", [make_line([[0, 0], [5, 0]]), make_line([[0, 1], [5, 1]])])
        assert sample_similarity(v, t, 7.5, 20) == pytest.approx(7.5, abs=1e-12)

    def test_prepared_path_matches_one_shot(self, rng):
        a = random_sample(rng, "pa")
        b = random_sample(rng, "pb")
        pa = prepare_sample(a, 20)
        pb = prepare_sample(b, 20)
        assert similarity_from_prepared(pa, pb, 10.0) == sample_similarity(a, b, 10.0, 20)

    def test_cross_class_grouping_matches_per_group_sum(self):
        # one class matches at cost 2, the other at cost 3, one surplus divider
        v = make_sample(
            "v",
            [
                make_line([[0, 0], [10, 0]], class_id=0),
                make_line([[0, 5], [10, 5]], class_id=1),
                make_line([[0, -5], [10, -5]], class_id=0),
            ],
        )
        t = make_sample(
            "t",
            [
                make_line([[0, 2], [10, 2]], class_id=0),
                make_line([[0, 8], [10, 8]], class_id=1),
            ],
        )
        delta = 10.0
        expected = (2.0 + 3.0 + delta) / 3.0
        assert sample_similarity(v, t, delta, 20) == pytest.approx(expected, abs=1e-12)


class TestGeoDistance:
    def test_same_map_euclidean(self):
        a = make_sample("a", [], ego=(0.0, 0.0))
        b = make_sample("b", [], ego=(3.0, 4.0))
        assert geo_distance(a, b) == 5.0

    def test_cross_map_infinite(self):
        a = make_sample("a", [], ego=(0.0, 0.0), map_name="m1")
        b = make_sample("b", [], ego=(0.0, 0.0), map_name="m2")
        assert math.isinf(geo_distance(a, b))
