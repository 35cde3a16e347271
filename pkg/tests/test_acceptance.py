"""Acceptance gate: one test per release criterion.

Each test pins its tolerance and (where stated) its time budget. The
conftest hook prints a PASS/FAIL line per criterion at the end of the run.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from mapsim import (
    MapElement,
    PredictionSet,
    SynthConfig,
    UnmatchableDistributions,
    candidate_transforms,
    chamfer_distance,
    discrete_frechet,
    frechet_match_distribution,
    geomdiv,
    geometric_overfitting,
    geometric_split,
    kl_divergence,
    m_iqr,
    map_score,
    match_distributions,
    min_cost_assignment,
    mst,
    overlap_region,
    pool_distributions,
    resample_uniform,
    sample_similarity,
    sim_topo,
    similarity_graph,
    sparsify,
    synth_generate,
)
from mapsim.dataset_diag import SimilarityMatrix, SimMeta, matrix_content_hash
from mapsim.eval_sets import PerSampleStats, SimilarityBins
from mapsim.geometry import POLYGON, POLYLINE

from conftest import make_line, make_sample, random_line, random_polygon, random_sample
from oracles import (
    assignment_oracle,
    frechet_coupling_oracle,
    mst_total_oracle,
    rotated_rect_overlap_oracle,
    weighted_slope_oracle,
)

DELTA = 10.0


@pytest.fixture(scope="module")
def planted_cluster_set():
    """200 marker scenes: 20 planted duplicate clusters of 2 (jitter 0.05)
    among singles, with every non-duplicate pair separated by >= 2.2 m and
    clusters >= 5 m apart."""
    config = SynthConfig(mode="markers", clusters=20, cluster_size=2, jitter=0.05)
    samples, _ = synth_generate(29, 200, config)
    return samples


def test_criterion_01_frechet_oracle(rng):
    start = time.perf_counter()
    for _ in range(200):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(2, 7))
        a = rng.uniform(-10, 10, (n, 2))
        b = rng.uniform(-10, 10, (m, 2))
        assert discrete_frechet(a, b) == pytest.approx(
            frechet_coupling_oracle(a, b), abs=1e-12
        )
    assert time.perf_counter() - start < 5.0


def test_criterion_02_assignment_oracle(rng):
    start = time.perf_counter()
    for _ in range(100):
        cost = rng.uniform(0, 10, (7, 7))
        assert min_cost_assignment(cost).total_cost == assignment_oracle(cost)
    assert time.perf_counter() - start < 10.0


def test_criterion_03_mst_oracle(rng):
    start = time.perf_counter()
    for _ in range(100):
        raw = rng.uniform(0.1, 10.0, (6, 6))
        weights = (raw + raw.T) / 2.0
        np.fill_diagonal(weights, 0.0)
        ids = tuple(f"n{k}" for k in range(6))
        matrix = SimilarityMatrix(
            ids, ids, weights, SimMeta(DELTA, 20, matrix_content_hash(ids, ids, DELTA, 20))
        )
        assert mst(matrix).total_weight == pytest.approx(
            mst_total_oracle(weights), abs=1e-12
        )
    assert time.perf_counter() - start < 10.0


def test_criterion_04_metric_ordering(rng):
    for _ in range(500):
        maker_a = random_line if rng.uniform() < 0.7 else random_polygon
        maker_b = random_line if rng.uniform() < 0.7 else random_polygon
        a = resample_uniform(maker_a(rng), 20)
        b = resample_uniform(maker_b(rng), 20)
        assert chamfer_distance(a, b) <= discrete_frechet(a, b) + 1e-9


def test_criterion_05_similarity_symmetry_identity(rng):
    for k in range(100):
        v = random_sample(rng, f"v{k}")
        t = random_sample(rng, f"t{k}")
        assert sample_similarity(v, t, DELTA) == pytest.approx(
            sample_similarity(t, v, DELTA), abs=1e-9
        )
        assert sample_similarity(v, v, DELTA) == 0.0


def test_criterion_06_o_geom_oracle(rng):
    def bin_table(mu, counts):
        b = len(mu)
        return SimilarityBins(
            edges=tuple(float(k) for k in range(b + 1)),
            bins=tuple(tuple(f"x{k}{i}" for i in range(c)) for k, c in enumerate(counts)),
            mu_s=tuple(mu),
            counts=tuple(counts),
        )

    done = 0
    while done < 50:
        b = int(rng.integers(2, 12))
        mu = np.sort(rng.uniform(0, 10, b))
        if len(np.unique(mu)) < b:
            continue
        m = rng.uniform(0, 3, b)
        w = rng.integers(1, 30, b)
        got = geometric_overfitting(bin_table(mu.tolist(), w.tolist()), m.tolist())
        assert got == pytest.approx(weighted_slope_oracle(mu, m, w.astype(float)), abs=1e-12)
        done += 1

    mu = np.array([1.0, 2.5, 4.0, 7.0, 9.0])
    m = np.array([0.4, 0.8, 1.1, 2.0, 2.3])
    got = geometric_overfitting(bin_table(mu.tolist(), [4, 4, 4, 4, 4]), m.tolist())
    assert got == pytest.approx(float(np.polyfit(mu, m, 1)[0]), abs=1e-12)


def test_criterion_07_kl_contract(rng):
    close_s = rng.uniform(0.0, 5.0, 40)
    far_s = close_s + rng.normal(0.0, 0.01, 40)
    close = [PerSampleStats(f"c{i}", 1.0, float(s), "t0", "t0") for i, s in enumerate(close_s)]
    far = [PerSampleStats(f"f{i}", 50.0, float(s), "t0", "t0") for i, s in enumerate(far_s)]
    subsets = match_distributions(close, far, kl_max=0.01, t_dist=5.0, min_pairs=10)
    by_id = {st.sample_id: st for st in close + far}
    close_star = [by_id[i].s for i in subsets.close_star_ids]
    far_star = [by_id[i].s for i in subsets.far_star_ids]
    assert subsets.kl_value < 0.01
    assert kl_divergence(close_star, far_star) < 0.01
    assert kl_divergence(close_star, far_star) == pytest.approx(subsets.kl_value, abs=1e-12)

    disjoint_close = [PerSampleStats(f"c{i}", 1.0, float(s), "t0", "t0") for i, s in enumerate(rng.uniform(0, 1, 15))]
    disjoint_far = [PerSampleStats(f"f{i}", 50.0, float(50 + s), "t0", "t0") for i, s in enumerate(rng.uniform(0, 1, 15))]
    with pytest.raises(UnmatchableDistributions):
        match_distributions(disjoint_close, disjoint_far, kl_max=0.01, t_dist=5.0, min_pairs=10)


def test_criterion_08_sparsification_ground_truth():
    start = time.perf_counter()
    config = SynthConfig(mode="markers", clusters=20, cluster_size=2, jitter=0.05)
    samples, _ = synth_generate(29, 200, config)
    result = sparsify(samples, threshold=0.5, workers=1)
    non_cluster = 200 - 20 * 2
    assert len(result.retained_ids) == 20 + non_cluster
    before = geomdiv(samples, workers=1)
    by_id = {s.sample_id: s for s in samples}
    after = geomdiv([by_id[i] for i in result.retained_ids], workers=1)
    assert (before - after) / before < 0.01
    assert time.perf_counter() - start < 60.0


def test_criterion_09_split_contract(planted_cluster_set):
    samples = planted_cluster_set
    split = geometric_split(samples)
    n = len(samples)
    parts = (split.train_ids, split.val_ids, split.test_ids)
    for ids, frac in zip(parts, (0.70, 0.15, 0.15)):
        assert abs(len(ids) / n - frac) <= 0.02

    assert sorted(i for ids in parts for i in ids) == sorted(s.sample_id for s in samples)

    tree = mst(similarity_graph(samples))
    for ids in parts:
        members = set(ids)
        parent = {i: i for i in members}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, _ in tree.edges:
            if a in members and b in members:
                parent[find(a)] = find(b)
        assert len({find(i) for i in members}) == 1

    decile = float(np.quantile([w for _, _, w in tree.edges], 0.90))
    for _, _, w in split.cut_edges:
        assert w >= decile


def test_criterion_10_topology_recovery():
    lam = 10.0
    fov = (30.0, 15.0)
    base = [
        make_line([[2.0, -3.0], [4.0, -1.0], [5.0, 2.0]], class_id=0),
        make_line([[-6.0, 1.0], [-3.0, 3.0], [0.0, 3.5], [2.0, 5.0]], class_id=1),
    ]
    v = make_sample("v", base, fov=fov)
    for deg in (15.0, 45.0, 90.0):
        theta = math.radians(deg)
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        t = make_sample(
            "t",
            [MapElement(e.class_id, e.kind, e.vertices @ rot.T) for e in base],
            fov=fov,
        )
        total = sim_topo(v, t, k_top=10, lam=lam, delta=DELTA, n_pts=20)
        r = rotated_rect_overlap_oracle(fov[0], fov[1], theta)
        assert total == pytest.approx(lam * (1.0 - r), abs=1e-6), f"theta={deg}"

        best = min(candidate_transforms(v, t, 10, 20), key=lambda cand: cand.aligned_pair_frechet)
        matched = total - lam * (1.0 - overlap_region(v, t, best.transform).ratio)
        assert matched <= 1e-6, f"theta={deg}"


def test_criterion_11_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("MAPSIM_WORKERS", raising=False)

    def run(args):
        proc = subprocess.run(
            [sys.executable, "-m", "mapsim", *args],
            capture_output=True,
            text=True,
            env=os.environ.copy(),
        )
        assert proc.returncode == 0, proc.stderr
        return proc

    synth_args = ["synth", "--seed", "7", "--n-samples", "60", "--val-count", "40", "--preds", "noisy"]
    run([*synth_args, "--out-dir", str(tmp_path / "data")])
    run([*synth_args, "--out-dir", str(tmp_path / "data2")])
    for name in ("full.jsonl", "train.jsonl", "val.jsonl", "preds.jsonl"):
        assert (tmp_path / "data" / name).read_bytes() == (tmp_path / "data2" / name).read_bytes()

    def report(out, workers):
        run([
            "report",
            "--train", str(tmp_path / "data" / "train.jsonl"),
            "--val", str(tmp_path / "data" / "val.jsonl"),
            "--preds", str(tmp_path / "data" / "preds.jsonl"),
            "--n-pts", "10",
            "--workers", str(workers),
            "--out", str(tmp_path / out),
        ])
        return (
            (tmp_path / out / "report.json").read_bytes(),
            (tmp_path / out / "per_sample.csv").read_bytes(),
        )

    first = report("run1", 1)
    assert report("rerun", 1) == first
    assert report("w4", 4) == first
    assert report("w8", 8) == first


def test_criterion_12_metric_sanity():
    def scene(sid, shift):
        return make_sample(
            sid,
            [
                MapElement(0, POLYLINE, np.array([[0.0, -2.0], [6.0 + shift, -2.0]])),
                MapElement(1, POLYLINE, np.array([[0.0, 4.0], [6.0, 4.5 + shift]])),
                MapElement(2, POLYGON, np.array([[1.0, 0.0], [3.0 + shift, 0.0], [3.0, 1.5], [1.0, 1.5]])),
            ],
        )

    gts = [scene(f"g{k}", 0.3 * k) for k in range(4)]
    taus = (0.5, 1.0, 1.5)

    perfect = [PredictionSet(g.sample_id, tuple((e, 1.0) for e in g.elements)) for g in gts]
    assert map_score(perfect, gts, range(3), taus, 20) == 1.0
    pooled = pool_distributions(
        [frechet_match_distribution(p, g, DELTA, 20) for p, g in zip(perfect, gts)]
    )
    assert m_iqr(pooled)[0] == 0.0

    empty = [PredictionSet(g.sample_id, ()) for g in gts]
    assert map_score(empty, gts, range(3), taus, 20) == 0.0
    pooled = pool_distributions(
        [frechet_match_distribution(p, g, DELTA, 20) for p, g in zip(empty, gts)]
    )
    assert m_iqr(pooled)[0] == DELTA
