"""File formats, synthetic data, reports, and the command-line interface.

Datasets and predictions are newline-delimited JSON with a header line;
similarity matrices persist in a small binary cache keyed by a content hash;
reports are deterministic JSON/CSV/SVG artifacts. The mapsim console script
dispatches to the subcommands defined at the bottom.
"""

from __future__ import annotations

import argparse
import json
import math
import struct
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _simmatrix
from .dataset_diag import (
    SimilarityMatrix,
    SimMeta,
    cross_similarity,
    geomdiv,
    matrix_content_hash,
    mst,
    similarity_graph,
    sparsify_from_mst,
    split_from_mst,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateRange,
    DuplicateId,
    EmptyDistribution,
    FormatError,
    InfeasibleError,
    MapSimError,
    NoGroundTruth,
)
from .eval_sets import (
    EvalSubsets,
    PerSampleStats,
    SimilarityBins,
    bin_far_set,
    match_distributions,
    nearest_train_stats,
    split_close_far,
)
from .geometry import POLYGON, POLYLINE, MapElement
from .matching import Sample
from .metrics import (
    MatchDistribution,
    PredictionSet,
    ap_chamfer,
    frechet_match_distribution,
    geometric_overfitting,
    localization_overfitting,
    m_iqr,
    map_score,
    pearson_r,
    pool_distributions,
)
from .topo_sim import OverlapRegion, clip_to_region, s_topo

FORMAT_VERSION = 1
DEFAULT_CLASS_TABLE = ("divider", "boundary", "ped_crossing")
DEFAULT_FOV = (30.0, 15.0)
DEFAULT_DELTA = 10.0
DEFAULT_N_PTS = 20
DEFAULT_TAUS = (0.5, 1.0, 1.5)
SWEEP_THRESHOLDS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)

# ---------------------------------------------------------------------------
# dataset / prediction files (newline-delimited JSON)
# ---------------------------------------------------------------------------


def _fov_region(sample_fov: tuple[float, float]) -> OverlapRegion:
    hl, hw = sample_fov
    rect = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    return OverlapRegion(rect, 1.0)


def _parse_element(
    obj: dict, class_table: Sequence[str], line_no: int, want_confidence: bool
) -> tuple[MapElement, float | None]:
    try:
        name = obj["class"]
        kind = obj["kind"]
        vertices = obj["vertices"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"line {line_no}: element missing field {exc}") from None
    if name not in class_table:
        raise FormatError(f"line {line_no}: unknown class {name!r}")
    if kind not in (POLYLINE, POLYGON):
        raise FormatError(f"line {line_no}: unknown element kind {kind!r}")
    conf = None
    if want_confidence:
        if "confidence" not in obj:
            raise FormatError(f"line {line_no}: prediction element lacks confidence")
        conf = float(obj["confidence"])
    try:
        elem = MapElement(class_table.index(name), kind, np.asarray(vertices, dtype=np.float64))
    except (DataError, ValueError) as exc:
        raise FormatError(f"line {line_no}: bad element geometry: {exc}") from None
    return elem, conf


def _parse_record(
    obj: dict, class_table: Sequence[str], line_no: int, want_confidence: bool
) -> tuple[Sample, tuple[float, ...]]:
    try:
        sid = obj["id"]
        log_id = obj["log_id"]
        map_name = obj["map_name"]
        ego = obj["ego"]
        fov = obj["fov"]
        raw_elems = obj["elements"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"line {line_no}: record missing field {exc}") from None
    if not isinstance(sid, str) or not sid:
        raise FormatError(f"line {line_no}: sample id must be a non-empty string")
    elems = []
    confs = []
    for e in raw_elems:
        elem, conf = _parse_element(e, class_table, line_no, want_confidence)
        elems.append(elem)
        if conf is not None:
            confs.append(conf)
    try:
        sample = Sample(
            sample_id=sid,
            log_id=str(log_id),
            map_name=str(map_name),
            ego_xy=np.array([float(ego["x"]), float(ego["y"])]),
            ego_yaw=float(ego["heading"]),
            fov=(float(fov["half_length"]), float(fov["half_width"])),
            elements=tuple(elems),
        )
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"line {line_no}: bad record: {exc}") from None
    return sample, tuple(confs)


def _read_header(line: str) -> tuple[str, ...]:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line 1: header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"line 1: expected header with format_version {FORMAT_VERSION}"
        )
    table = header.get("class_table")
    if not isinstance(table, list) or not all(isinstance(c, str) for c in table):
        raise FormatError("line 1: header class_table must be a list of strings")
    if header.get("units") != "meters":
        raise FormatError("line 1: header units must be 'meters'")
    return tuple(table)


def load_dataset(path: str | Path) -> tuple[list[Sample], tuple[str, ...]]:
    """Load samples from a dataset file, clipping elements to each FOV.

    Samples come back sorted by id. Elements that fall entirely outside
    their sample's field of view are dropped.
    """
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file, expected a header line")
    class_table = _read_header(lines[0])
    samples = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {line_no}: invalid JSON: {exc}") from None
        sample, _ = _parse_record(obj, class_table, line_no, want_confidence=False)
        if sample.sample_id in seen:
            raise DuplicateId(f"line {line_no}: duplicate sample id {sample.sample_id!r}")
        seen.add(sample.sample_id)
        clipped = clip_to_region(sample.elements, _fov_region(sample.fov))
        samples.append(replace(sample, elements=tuple(clipped)))
    samples.sort(key=lambda s: s.sample_id)
    return samples, class_table


def _element_obj(elem: MapElement, class_table: Sequence[str]) -> dict:
    return {
        "class": class_table[elem.class_id],
        "kind": elem.kind,
        "vertices": [[float(x), float(y)] for x, y in elem.vertices],
    }


def _sample_obj(sample: Sample, class_table: Sequence[str]) -> dict:
    return {
        "id": sample.sample_id,
        "log_id": sample.log_id,
        "map_name": sample.map_name,
        "ego": {"x": float(sample.ego_xy[0]), "y": float(sample.ego_xy[1]), "heading": sample.ego_yaw},
        "fov": {"half_length": sample.fov[0], "half_width": sample.fov[1]},
        "elements": [_element_obj(e, class_table) for e in sample.elements],
    }


def save_dataset(
    path: str | Path, samples: Sequence[Sample], class_table: Sequence[str]
) -> None:
    """Write samples (sorted by id) in the dataset file format."""
    lines = [
        json.dumps(
            {"format_version": FORMAT_VERSION, "class_table": list(class_table), "units": "meters"}
        )
    ]
    for sample in sorted(samples, key=lambda s: s.sample_id):
        lines.append(json.dumps(_sample_obj(sample, class_table)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_predictions(
    path: str | Path, known_ids: Iterable[str]
) -> dict[str, PredictionSet]:
    """Load prediction sets; every record id must resolve against known_ids."""
    known = set(known_ids)
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file, expected a header line")
    class_table = _read_header(lines[0])
    out: dict[str, PredictionSet] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {line_no}: invalid JSON: {exc}") from None
        sample, confs = _parse_record(obj, class_table, line_no, want_confidence=True)
        if sample.sample_id not in known:
            raise FormatError(
                f"line {line_no}: prediction id {sample.sample_id!r} not in dataset"
            )
        if sample.sample_id in out:
            raise DuplicateId(f"line {line_no}: duplicate prediction id {sample.sample_id!r}")
        try:
            out[sample.sample_id] = PredictionSet(
                sample.sample_id, tuple(zip(sample.elements, confs))
            )
        except DataError as exc:
            raise FormatError(f"line {line_no}: {exc}") from None
    return out


def save_predictions(
    path: str | Path,
    preds: Mapping[str, PredictionSet],
    samples_by_id: Mapping[str, Sample],
    class_table: Sequence[str],
) -> None:
    """Write prediction sets in the prediction file format."""
    lines = [
        json.dumps(
            {"format_version": FORMAT_VERSION, "class_table": list(class_table), "units": "meters"}
        )
    ]
    for sid in sorted(preds):
        pset = preds[sid]
        base = samples_by_id[sid]
        obj = _sample_obj(replace(base, elements=()), class_table)
        obj["elements"] = []
        for elem, conf in pset.elements:
            eobj = _element_obj(elem, class_table)
            eobj["confidence"] = float(conf)
            obj["elements"].append(eobj)
        lines.append(json.dumps(obj))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# similarity cache (binary)
# ---------------------------------------------------------------------------

_CACHE_MAGIC = b"GSIM"
_CACHE_HEADER = struct.Struct("<4sIQQ32s")


def save_similarity(path: str | Path, matrix: SimilarityMatrix) -> None:
    """Persist a similarity matrix for reuse by later commands."""
    values = np.ascontiguousarray(matrix.values, dtype="<f8")
    header = _CACHE_HEADER.pack(
        _CACHE_MAGIC,
        1,
        values.shape[0],
        values.shape[1],
        matrix.meta.content_hash,
    )
    Path(path).write_bytes(header + values.tobytes())


def load_similarity(
    path: str | Path,
    row_ids: Sequence[str],
    col_ids: Sequence[str],
    delta: float,
    n_pts: int,
) -> SimilarityMatrix | None:
    """Load a cached matrix if it matches the expected inputs, else None."""
    p = Path(path)
    if not p.is_file():
        return None
    blob = p.read_bytes()
    if len(blob) < _CACHE_HEADER.size:
        return None
    magic, version, n_rows, n_cols, digest = _CACHE_HEADER.unpack_from(blob)
    expected = matrix_content_hash(row_ids, col_ids, delta, n_pts)
    if (
        magic != _CACHE_MAGIC
        or version != 1
        or n_rows != len(row_ids)
        or n_cols != len(col_ids)
        or digest != expected
        or len(blob) != _CACHE_HEADER.size + n_rows * n_cols * 8
    ):
        return None
    values = np.frombuffer(blob, dtype="<f8", offset=_CACHE_HEADER.size).reshape(
        n_rows, n_cols
    ).astype(np.float64)
    return SimilarityMatrix(
        tuple(row_ids), tuple(col_ids), values, SimMeta(delta, n_pts, expected)
    )


def _cached_cross_similarity(
    rows: Sequence[Sample],
    cols: Sequence[Sample],
    delta: float,
    n_pts: int,
    workers: int,
    cache_path: Path | None,
) -> SimilarityMatrix:
    rid = [s.sample_id for s in rows]
    cid = [s.sample_id for s in cols]
    if cache_path is not None:
        cached = load_similarity(cache_path, rid, cid, delta, n_pts)
        if cached is not None:
            return cached
    matrix = cross_similarity(rows, cols, delta, n_pts, workers)
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_similarity(cache_path, matrix)
    return matrix


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic scene generator.

    mode "roads" builds straight/arc/intersection street scenes; mode
    "markers" places a single short divider per scene at a scene-specific
    offset, which makes sample similarity equal the exact offset distance
    (handy for constructions with provable cluster/split structure).
    """

    mode: str = "roads"
    class_table: tuple[str, ...] = DEFAULT_CLASS_TABLE
    fov: tuple[float, float] = DEFAULT_FOV
    val_count: int = 0
    predictions: str = "none"
    noise_sigma: float = 0.15
    clusters: int = 0
    cluster_size: int = 2
    jitter: float = 0.05
    blob_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def validate(self, n_samples: int) -> None:
        if n_samples < 1:
            raise ConfigError(f"n_samples must be at least 1, got {n_samples}")
        if self.mode not in ("roads", "markers"):
            raise ConfigError(f"unknown synth mode {self.mode!r}")
        if self.predictions not in ("none", "perfect", "noisy"):
            raise ConfigError(f"unknown prediction mode {self.predictions!r}")
        if not (0 <= self.val_count <= n_samples):
            raise ConfigError(f"val_count must lie in [0, {n_samples}]")
        if self.clusters < 0 or self.cluster_size < 1 or self.jitter < 0:
            raise ConfigError("clusters, cluster_size, and jitter must be non-negative")
        if self.clusters * self.cluster_size > n_samples:
            raise ConfigError("cluster members exceed n_samples")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")


def _grid_positions(count: int, spacing: float, origin: tuple[float, float]) -> np.ndarray:
    cols = math.ceil(math.sqrt(count))
    pts = []
    for k in range(count):
        r, c = divmod(k, cols)
        pts.append([origin[0] + c * spacing, origin[1] + r * spacing])
    return np.array(pts) if pts else np.empty((0, 2))


def _grid_width(count: int, spacing: float) -> float:
    if count <= 0:
        return 0.0
    cols = math.ceil(math.sqrt(count))
    return (min(count, cols) - 1) * spacing


def _clamped_jitter(rng: np.random.Generator, sigma: float, limit: float) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(2)
    while True:
        j = rng.normal(0.0, sigma, size=2)
        if math.hypot(j[0], j[1]) <= limit:
            return j


def _marker_anchors(
    n_samples: int, config: SynthConfig, rng: np.random.Generator
) -> list[tuple[np.ndarray, int]]:
    """Anchor position and cluster index (-1 for singles) per sample."""
    f1, f2, f3 = config.blob_fractions
    if abs(f1 + f2 + f3 - 1.0) > 1e-9 or min(f1, f2, f3) <= 0:
        raise ConfigError(f"blob fractions must be positive and sum to 1, got {config.blob_fractions}")
    c2 = round(f2 * n_samples)
    c3 = round(f3 * n_samples)
    c1 = n_samples - c2 - c3
    members = config.clusters * config.cluster_size
    if members > c1:
        raise ConfigError("cluster members exceed the first blob's sample count")
    singles1 = c1 - members
    base_spacing = 5.5
    grid1 = _grid_positions(singles1, 2.2, (0.0, 0.0))
    bases_ox = _grid_width(singles1, 2.2) + 10.0
    bases = _grid_positions(config.clusters, base_spacing, (bases_ox, 0.0))
    blob2_ox = bases_ox + _grid_width(config.clusters, base_spacing) + 35.0
    grid2 = _grid_positions(c2, 2.2, (blob2_ox, 0.0))
    blob3_ox = blob2_ox + _grid_width(c2, 2.2) + 30.0
    grid3 = _grid_positions(c3, 2.2, (blob3_ox, 0.0))
    anchors: list[tuple[np.ndarray, int]] = []
    for pos in grid1:
        anchors.append((pos, -1))
    limit = 4.0 * config.jitter
    for ci, base in enumerate(bases):
        for _ in range(config.cluster_size):
            anchors.append((base + _clamped_jitter(rng, config.jitter, limit), ci))
    for pos in np.vstack([grid2, grid3]) if c2 + c3 else []:
        anchors.append((pos, -1))
    return anchors


def _marker_samples(n_samples: int, config: SynthConfig, rng: np.random.Generator) -> list[Sample]:
    anchors = _marker_anchors(n_samples, config, rng)
    all_xy = np.array([a for a, _ in anchors])
    hl = float(np.abs(all_xy[:, 0]).max()) + 12.0
    hw = float(np.abs(all_xy[:, 1]).max()) + 12.0
    samples = []
    for k, (anchor, _) in enumerate(anchors):
        ax, ay = float(anchor[0]), float(anchor[1])
        marker = MapElement(0, POLYLINE, np.array([[ax, ay - 4.0], [ax, ay + 4.0]]))
        samples.append(
            Sample(
                sample_id=f"s{k:04d}",
                log_id=f"log{k // 10:03d}",
                map_name="synthmap",
                ego_xy=np.array([ax, ay]),
                ego_yaw=0.0,
                fov=(hl, hw),
                elements=(marker,),
            )
        )
    return samples


def _road_elements(rng: np.random.Generator, fov: tuple[float, float]) -> list[MapElement]:
    hl, hw = fov
    span = hl - 2.0
    xs = np.linspace(-span, span, 8)
    kind = rng.integers(0, 3)
    elems: list[MapElement] = []
    if kind == 0:
        half_road = rng.uniform(5.0, min(9.0, hw - 2.0))
        for sign in (-1.0, 1.0):
            ys = np.full(8, sign * half_road) + rng.normal(0.0, 0.05, 8)
            elems.append(MapElement(1, POLYLINE, np.column_stack([xs, ys])))
        for k in range(int(rng.integers(0, 4))):
            offset = rng.uniform(-half_road + 1.5, half_road - 1.5)
            ys = np.full(8, offset) + rng.normal(0.0, 0.05, 8)
            elems.append(MapElement(0, POLYLINE, np.column_stack([xs, ys])))
    elif kind == 1:
        radius = rng.uniform(30.0, 80.0)
        width = rng.uniform(5.0, min(9.0, hw - 2.0))
        theta = np.linspace(-span / radius, span / radius, 10)
        cy = -radius
        for r in (radius - width, radius + width):
            pts = np.column_stack([r * np.sin(theta), cy + r * np.cos(theta)])
            elems.append(MapElement(1, POLYLINE, pts))
        if rng.uniform() < 0.7:
            pts = np.column_stack([radius * np.sin(theta), cy + radius * np.cos(theta)])
            elems.append(MapElement(0, POLYLINE, pts))
    else:
        half_road = rng.uniform(4.0, min(7.0, hw - 3.0))
        for sign in (-1.0, 1.0):
            ys = np.full(8, sign * half_road)
            elems.append(MapElement(1, POLYLINE, np.column_stack([xs, ys])))
        n_cross = int(rng.integers(1, 3))
        for k in range(n_cross):
            cx = rng.uniform(-span / 2, span / 2)
            w = rng.uniform(2.0, 4.0)
            rect = np.array(
                [
                    [cx - w / 2, -half_road],
                    [cx + w / 2, -half_road],
                    [cx + w / 2, half_road],
                    [cx - w / 2, half_road],
                ]
            )
            elems.append(MapElement(2, POLYGON, rect))
    return elems


def _shift_elements(elements: Sequence[MapElement], offset: np.ndarray) -> tuple[MapElement, ...]:
    return tuple(
        MapElement(e.class_id, e.kind, e.vertices + offset[None, :]) for e in elements
    )


def _road_samples(n_samples: int, config: SynthConfig, rng: np.random.Generator) -> list[Sample]:
    n_train = n_samples - config.val_count
    samples: list[Sample] = []
    for k in range(n_train):
        pos = np.array([(k % 10) * 70.0, (k // 10) * 70.0])
        samples.append(
            Sample(
                sample_id=f"s{k:04d}",
                log_id=f"log{k // 10:03d}",
                map_name="synthmap",
                ego_xy=pos,
                ego_yaw=0.0,
                fov=config.fov,
                elements=tuple(_road_elements(rng, config.fov)),
            )
        )
    for v in range(config.val_count):
        k = n_train + v
        sid = f"s{k:04d}"
        log = f"log{900 + v:03d}"
        role = v % 4 if n_train > 0 else 3
        far_pos = np.array([(v % 10) * 70.0 + 20.0, 3000.0 + (v // 10) * 70.0])
        if role == 0:
            # revisited location, identical local geometry (memorized scene)
            base = samples[int(rng.integers(0, n_train))]
            shift = rng.uniform(0.5, 4.0)
            angle = rng.uniform(0.0, 2.0 * math.pi)
            offset = np.array([shift * math.cos(angle), shift * math.sin(angle)])
            sample = Sample(sid, log, "synthmap", base.ego_xy + offset, 0.0, config.fov, base.elements)
        elif role == 1:
            # far-away location whose local geometry repeats a training scene
            base = samples[int(rng.integers(0, n_train))]
            sample = Sample(sid, log, "synthmap", far_pos, 0.0, config.fov, base.elements)
        elif role == 2:
            # revisited location seen from a slightly moved ego
            base = samples[int(rng.integers(0, n_train))]
            shift = rng.uniform(0.3, 3.0)
            angle = rng.uniform(0.0, 2.0 * math.pi)
            offset = np.array([shift * math.cos(angle), shift * math.sin(angle)])
            sample = Sample(
                sid,
                log,
                "synthmap",
                base.ego_xy + offset,
                0.0,
                config.fov,
                _shift_elements(base.elements, -offset),
            )
        else:
            sample = Sample(
                sid, log, "synthmap", far_pos, 0.0, config.fov, tuple(_road_elements(rng, config.fov))
            )
        samples.append(sample)
    return samples


def _noisy_predictions(
    samples: Sequence[Sample], config: SynthConfig, rng: np.random.Generator
) -> dict[str, PredictionSet]:
    preds = {}
    for sample in samples:
        elems = []
        for elem in sample.elements:
            if rng.uniform() < 0.05:
                continue
            noisy = elem.vertices + rng.normal(0.0, config.noise_sigma, elem.vertices.shape)
            conf = float(min(1.0, max(0.05, 1.0 - abs(rng.normal(0.0, 0.08)))))
            elems.append((MapElement(elem.class_id, elem.kind, noisy), conf))
        preds[sample.sample_id] = PredictionSet(sample.sample_id, tuple(elems))
    return preds


def synth_generate(
    seed: int, n_samples: int, config: SynthConfig
) -> tuple[list[Sample], dict[str, PredictionSet]]:
    """Generate a seeded synthetic sample collection and optional predictions.

    The trailing config.val_count samples form the validation-flavored tail
    (roads mode alternates revisited and fresh locations there). Predictions
    cover the tail, or every sample when val_count is 0.
    """
    config.validate(n_samples)
    rng = np.random.default_rng(seed)
    if config.mode == "markers":
        samples = _marker_samples(n_samples, config, rng)
    else:
        samples = _road_samples(n_samples, config, rng)
    targets = samples[-config.val_count :] if config.val_count else samples
    if config.predictions == "perfect":
        preds = {
            s.sample_id: PredictionSet(
                s.sample_id, tuple((e, 1.0) for e in s.elements)
            )
            for s in targets
        }
    elif config.predictions == "noisy":
        preds = _noisy_predictions(targets, config, rng)
    else:
        preds = {}
    return samples, preds


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


def _json_float(x: float | None) -> float | None:
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return None
    return float(x)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _svg_scatter(
    points: Sequence[tuple[float, float]], x_label: str, y_label: str
) -> str:
    """Minimal deterministic scatter plot (fixed canvas, repr coordinates)."""
    width, height, margin = 640, 480, 50
    finite = [(x, y) for x, y in points if math.isfinite(x) and math.isfinite(y)]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="14">{x_label}</text>',
        f'<text x="16" y="{height // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {height // 2})">{y_label}</text>',
    ]
    if finite:
        xs = [p[0] for p in finite]
        ys = [p[1] for p in finite]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        x_span = (x_hi - x_lo) or 1.0
        y_span = (y_hi - y_lo) or 1.0
        for x, y in finite:
            px = margin + (x - x_lo) / x_span * (width - 2 * margin)
            py = height - margin - (y - y_lo) / y_span * (height - 2 * margin)
            parts.append(f'<circle cx="{px!r}" cy="{py!r}" r="3" fill="steelblue"/>')
        parts.append(
            f'<text x="{width - margin}" y="{margin - 10}" text-anchor="end" '
            f'font-size="12">n={len(finite)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _subsets_obj(subsets: EvalSubsets) -> dict:
    return {
        "t_dist": subsets.t_dist,
        "close_ids": list(subsets.close_ids),
        "far_ids": list(subsets.far_ids),
        "close_star_ids": list(subsets.close_star_ids),
        "far_star_ids": list(subsets.far_star_ids),
        "pairing": [[c, f, g] for c, f, g in subsets.pairing],
        "kl_value": subsets.kl_value,
        "kl_threshold_used": subsets.kl_threshold_used,
    }


def _bins_obj(bins: SimilarityBins) -> dict:
    return {
        "edges": list(bins.edges),
        "bins": [list(b) for b in bins.bins],
        "mu_s": [(_json_float(m) if m is not None else None) for m in bins.mu_s],
        "counts": list(bins.counts),
    }


@dataclass
class ReportConfig:
    delta: float = DEFAULT_DELTA
    n_pts: int = DEFAULT_N_PTS
    t_dist: float = 5.0
    kl_max: float = 0.01
    min_pairs: int = 10
    bins: int = 10
    taus: tuple[float, ...] = DEFAULT_TAUS
    conf_min: float | None = None
    k_top: int = 10
    lam: float = DEFAULT_DELTA
    workers: int = 1
    with_topo: bool = False

    def echo(self) -> dict:
        return {
            "delta": self.delta,
            "n_pts": self.n_pts,
            "t_dist": self.t_dist,
            "kl_max": self.kl_max,
            "min_pairs": self.min_pairs,
            "bins": self.bins,
            "taus": list(self.taus),
            "conf_min": self.conf_min,
            "k_top": self.k_top if self.with_topo else None,
            "lambda": self.lam if self.with_topo else None,
        }


def build_report(
    train: Sequence[Sample],
    val: Sequence[Sample],
    preds: Mapping[str, PredictionSet] | None,
    class_table: Sequence[str],
    config: ReportConfig,
    cache_path: Path | None = None,
) -> dict:
    """Assemble the full evaluation report as one JSON-ready dictionary."""
    train_sorted = sorted(train, key=lambda s: s.sample_id)
    matrix = _cached_cross_similarity(
        val, train_sorted, config.delta, config.n_pts, config.workers, cache_path
    )
    stats = nearest_train_stats(
        val, train_sorted, config.delta, config.n_pts, config.workers, matrix.values
    )
    if config.with_topo:
        stats = [
            replace(
                st,
                s_topo=s_topo(
                    v, train_sorted, config.k_top, config.lam, config.delta, config.n_pts
                )[0],
            )
            for st, v in zip(stats, val)
        ]
    close_ids, far_ids = split_close_far(stats, config.t_dist)
    by_id = {st.sample_id: st for st in stats}
    subsets = None
    subsets_error = None
    try:
        subsets = match_distributions(
            [by_id[i] for i in close_ids],
            [by_id[i] for i in far_ids],
            config.kl_max,
            config.t_dist,
            config.min_pairs,
        )
    except (EmptyDistribution, InfeasibleError) as exc:
        subsets_error = str(exc)
    bins = None
    bins_error = None
    try:
        bins = bin_far_set([by_id[i] for i in far_ids], config.bins)
    except (ConfigError, DegenerateRange) as exc:
        bins_error = str(exc)

    per_sample = []
    dists: dict[str, MatchDistribution] = {}
    for v in val:
        st = by_id[v.sample_id]
        row = {
            "id": v.sample_id,
            "d": _json_float(st.d),
            "s": st.s,
            "s_topo": st.s_topo,
            "nearest_by_d": st.nearest_train_id_by_d,
            "nearest_by_s": st.nearest_train_id_by_s,
        }
        if preds is not None:
            dist = frechet_match_distribution(
                preds.get(v.sample_id, PredictionSet(v.sample_id, ())),
                v,
                config.delta,
                config.n_pts,
                config.conf_min,
            )
            dists[v.sample_id] = dist
            row["costs"] = list(dist.costs)
            row["unmatched_gt"] = dist.unmatched_gt_count
            if dist.costs:
                m, iqr = m_iqr(dist)
                row["m"] = m
                row["iqr"] = iqr
            else:
                row["m"] = None
                row["iqr"] = None
        per_sample.append(row)

    report: dict = {
        "config": config.echo(),
        "class_table": list(class_table),
        "n_train": len(train_sorted),
        "n_val": len(val),
        "per_sample": per_sample,
        "subsets": _subsets_obj(subsets) if subsets else None,
        "subsets_error": subsets_error,
        "bins": _bins_obj(bins) if bins else None,
        "bins_error": bins_error,
    }

    if preds is not None:
        pred_list = [preds[sid] for sid in sorted(preds)]
        per_class_tau = {}
        skipped = []
        for class_id, name in enumerate(class_table):
            try:
                per_class_tau[name] = {
                    repr(tau): ap_chamfer(pred_list, val, class_id, tau, config.n_pts)
                    for tau in config.taus
                }
            except NoGroundTruth:
                skipped.append(name)
        try:
            overall = map_score(
                pred_list, val, range(len(class_table)), config.taus, config.n_pts
            )
        except NoGroundTruth:
            overall = None
        report["map"] = {"per_class_tau": per_class_tau, "skipped_classes": skipped, "score": overall}

        def pooled(ids: Sequence[str]) -> tuple[float, float] | None:
            parts = [dists[i] for i in sorted(ids) if i in dists and dists[i].costs]
            if not parts:
                return None
            return m_iqr(pool_distributions(parts))

        m_all = pooled([v.sample_id for v in val])
        report["m_iqr"] = {"all": list(m_all) if m_all else None}
        o_loc = None
        if subsets is not None:
            m_close = pooled(subsets.close_star_ids)
            m_far = pooled(subsets.far_star_ids)
            report["m_iqr"]["close_star"] = list(m_close) if m_close else None
            report["m_iqr"]["far_star"] = list(m_far) if m_far else None
            if m_close and m_far and m_close[0] > 0:
                o_loc = localization_overfitting(m_close[0], m_far[0])
        report["o_loc"] = o_loc
        o_geom = None
        bin_table = None
        if bins is not None:
            m_per_bin = []
            for members in bins.bins:
                mb = pooled(members)
                m_per_bin.append(mb[0] if mb else None)
            bin_table = [
                {
                    "mu_s": _json_float(mu) if mu is not None else None,
                    "m": m,
                    "count": w,
                }
                for mu, m, w in zip(bins.mu_s, m_per_bin, bins.counts)
            ]
            try:
                o_geom = geometric_overfitting(bins, m_per_bin)
            except (ConfigError, DegenerateRange):
                o_geom = None
        report["bin_table"] = bin_table
        report["o_geom"] = o_geom

    div_train = (
        mst(similarity_graph(train_sorted, config.delta, config.n_pts, config.workers)).total_weight
        if len(train_sorted) >= 2
        else 0.0
    )
    div_val = (
        mst(similarity_graph(val, config.delta, config.n_pts, config.workers)).total_weight
        if len(val) >= 2
        else 0.0
    )
    report["geomdiv"] = {"train": div_train, "val": div_val}
    report["geomsim"] = 0.5 * (
        float(matrix.values.min(axis=1).mean()) + float(matrix.values.min(axis=0).mean())
    )

    finite = [(st.d, st.s) for st in stats if math.isfinite(st.d)]
    pearson: dict[str, float | None] = {"d_s": None, "s_m": None}
    if len(finite) >= 2:
        try:
            pearson["d_s"] = pearson_r([p[0] for p in finite], [p[1] for p in finite])
        except DegenerateRange:
            pass
    if preds is not None:
        pairs = [
            (by_id[v.sample_id].s, row["m"])
            for v, row in zip(val, per_sample)
            if row.get("m") is not None
        ]
        if len(pairs) >= 2:
            try:
                pearson["s_m"] = pearson_r([p[0] for p in pairs], [p[1] for p in pairs])
            except DegenerateRange:
                pass
    report["pearson"] = pearson
    return report


def write_report_files(report: dict, out_dir: Path, plots: bool) -> None:
    """Emit report.json, the per-sample CSV, and optional SVG scatter plots."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", report)
    cols = ["id", "d", "s", "s_topo", "m", "iqr", "nearest_by_d", "nearest_by_s"]
    lines = [",".join(cols)]
    for row in report["per_sample"]:
        cells = []
        for c in cols:
            v = row.get(c)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    (out_dir / "per_sample.csv").write_text("\n".join(lines) + "\n")
    if plots:
        plot_dir = out_dir / "plots"
        plot_dir.mkdir(exist_ok=True)
        d_s = [
            (row["d"], row["s"])
            for row in report["per_sample"]
            if row["d"] is not None
        ]
        (plot_dir / "d_vs_s.svg").write_text(
            _svg_scatter(d_s, "d to nearest train (m)", "s to nearest train (m)")
        )
        s_m = [
            (row["s"], row["m"])
            for row in report["per_sample"]
            if row.get("m") is not None
        ]
        (plot_dir / "s_vs_m.svg").write_text(
            _svg_scatter(s_m, "s to nearest train (m)", "per-sample M (m)")
        )


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="unmatched-element penalty in meters")
    p.add_argument("--n-pts", type=int, default=DEFAULT_N_PTS, help="resampled vertices per element")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (default: MAPSIM_WORKERS or 1)")


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapsim",
        description="Geometric similarity analysis for vectorized map datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-sample distance/similarity to the training set")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval-sets", help="close/far split, matched subsets, bins")
    p.add_argument("--stats", required=True, help="stats.json from the stats command")
    p.add_argument("--t-dist", type=float, default=5.0)
    p.add_argument("--kl-max", type=float, default=0.01)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--min-pairs", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="mAP and M/IQR for a prediction file")
    p.add_argument("--preds", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--taus", type=_float_list, default=DEFAULT_TAUS)
    p.add_argument("--conf-min", type=float, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("overfit", help="overfitting scores from prior artifacts")
    p.add_argument("--eval-sets", required=True, dest="eval_sets")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diversity", help="MST diversity of one dataset")
    p.add_argument("--set", required=True, dest="dataset")
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("geomsim", help="symmetric coverage similarity of two datasets")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("sparsify", help="prune near-duplicate samples via MST clusters")
    p.add_argument("--set", required=True, dest="dataset")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--sweep", action="store_true", help="also sweep the standard threshold ladder")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("make-split", help="derive a geometric train/val/test split")
    p.add_argument("--set", required=True, dest="dataset")
    p.add_argument("--fractions", type=_float_list, default=(0.70, 0.15, 0.15))
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("topo-stats", help="alignment-invariant similarity to the training set")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--k-top", type=int, default=10)
    p.add_argument("--lam", "--lambda", type=float, default=DEFAULT_DELTA, dest="lam")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--mode", choices=("roads", "markers"), default="roads")
    p.add_argument("--val-count", type=int, default=0)
    p.add_argument("--preds", choices=("none", "perfect", "noisy"), default="none")
    p.add_argument("--noise-sigma", type=float, default=0.15)
    p.add_argument("--clusters", type=int, default=0)
    p.add_argument("--cluster-size", type=int, default=2)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("report", help="full evaluation report in one pass")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--preds", default=None)
    p.add_argument("--t-dist", type=float, default=5.0)
    p.add_argument("--kl-max", type=float, default=0.01)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--min-pairs", type=int, default=10)
    p.add_argument("--taus", type=_float_list, default=DEFAULT_TAUS)
    p.add_argument("--conf-min", type=float, default=None)
    p.add_argument("--topo", action="store_true")
    p.add_argument("--k-top", type=int, default=10)
    p.add_argument("--lam", "--lambda", type=float, default=DEFAULT_DELTA, dest="lam")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _load_stats_file(path: str) -> list[PerSampleStats]:
    obj = json.loads(Path(path).read_text())
    try:
        return [
            PerSampleStats(
                sample_id=row["id"],
                d=math.inf if row["d"] is None else float(row["d"]),
                s=float(row["s"]),
                nearest_train_id_by_d=row["nearest_by_d"],
                nearest_train_id_by_s=row["nearest_by_s"],
                s_topo=row.get("s_topo"),
            )
            for row in obj["per_sample"]
        ]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a stats file ({exc})") from None


def _cmd_stats(args) -> int:
    workers = _simmatrix.resolve_workers(args.workers)
    train, _ = load_dataset(args.train)
    val, _ = load_dataset(args.val)
    out = Path(args.out)
    cache = out / "sim_val_x_train.gsim"
    matrix = _cached_cross_similarity(val, train, args.delta, args.n_pts, workers, cache)
    stats = nearest_train_stats(val, train, args.delta, args.n_pts, workers, matrix.values)
    payload = {
        "config": {"delta": args.delta, "n_pts": args.n_pts, "train": str(args.train), "val": str(args.val)},
        "per_sample": [
            {
                "id": st.sample_id,
                "d": _json_float(st.d),
                "s": st.s,
                "nearest_by_d": st.nearest_train_id_by_d,
                "nearest_by_s": st.nearest_train_id_by_s,
            }
            for st in stats
        ],
    }
    _write_json(out / "stats.json", payload)
    print(f"stats: {len(stats)} validation samples against {len(train)} training samples")
    return 0


def _cmd_eval_sets(args) -> int:
    stats = _load_stats_file(args.stats)
    close_ids, far_ids = split_close_far(stats, args.t_dist)
    by_id = {st.sample_id: st for st in stats}
    subsets = match_distributions(
        [by_id[i] for i in close_ids],
        [by_id[i] for i in far_ids],
        args.kl_max,
        args.t_dist,
        args.min_pairs,
    )
    bins = bin_far_set([by_id[i] for i in far_ids], args.bins)
    payload = {
        "config": {
            "t_dist": args.t_dist,
            "kl_max": args.kl_max,
            "bins": args.bins,
            "min_pairs": args.min_pairs,
        },
        "subsets": _subsets_obj(subsets),
        "bins": _bins_obj(bins),
    }
    _write_json(Path(args.out) / "eval_sets.json", payload)
    print(
        f"eval-sets: close {len(close_ids)}, far {len(far_ids)}, "
        f"matched {len(subsets.close_star_ids)} pairs, KL {subsets.kl_value:.5f}"
    )
    return 0


def _cmd_metrics(args) -> int:
    gts, class_table = load_dataset(args.gt)
    preds = load_predictions(args.preds, [g.sample_id for g in gts])
    pred_list = [preds[sid] for sid in sorted(preds)]
    per_class_tau = {}
    skipped = []
    for class_id, name in enumerate(class_table):
        try:
            per_class_tau[name] = {
                repr(tau): ap_chamfer(pred_list, gts, class_id, tau, args.n_pts)
                for tau in args.taus
            }
        except NoGroundTruth:
            skipped.append(name)
    overall = map_score(pred_list, gts, range(len(class_table)), args.taus, args.n_pts)
    per_sample = []
    parts = []
    for g in sorted(gts, key=lambda s: s.sample_id):
        dist = frechet_match_distribution(
            preds.get(g.sample_id, PredictionSet(g.sample_id, ())),
            g,
            args.delta,
            args.n_pts,
            args.conf_min,
        )
        parts.append(dist)
        row = {"id": g.sample_id, "costs": list(dist.costs), "unmatched_gt": dist.unmatched_gt_count}
        if dist.costs:
            m, iqr = m_iqr(dist)
            row["m"] = m
            row["iqr"] = iqr
        else:
            row["m"] = None
            row["iqr"] = None
        per_sample.append(row)
    pooled = pool_distributions(parts)
    m_all, iqr_all = m_iqr(pooled) if pooled.costs else (None, None)
    payload = {
        "config": {
            "delta": args.delta,
            "n_pts": args.n_pts,
            "taus": list(args.taus),
            "conf_min": args.conf_min,
        },
        "map": {"per_class_tau": per_class_tau, "skipped_classes": skipped, "score": overall},
        "m_iqr": {"all": [m_all, iqr_all] if m_all is not None else None},
        "per_sample": per_sample,
    }
    _write_json(Path(args.out) / "metrics.json", payload)
    print(f"metrics: mAP {overall:.4f}, M {m_all if m_all is not None else 'n/a'}")
    return 0


def _cmd_overfit(args) -> int:
    eval_obj = json.loads(Path(args.eval_sets).read_text())
    metrics_obj = json.loads(Path(args.metrics).read_text())
    costs_by_id = {row["id"]: row["costs"] for row in metrics_obj["per_sample"]}

    def pooled_m(ids: Sequence[str]) -> float | None:
        costs: list[float] = []
        for sid in sorted(ids):
            costs.extend(costs_by_id.get(sid, []))
        if not costs:
            return None
        dist = MatchDistribution(tuple(costs), 0, tuple(ids))
        return m_iqr(dist)[0]

    sub = eval_obj["subsets"]
    m_close = pooled_m(sub["close_star_ids"])
    m_far = pooled_m(sub["far_star_ids"])
    o_loc = (
        localization_overfitting(m_close, m_far)
        if m_close and m_far and m_close > 0
        else None
    )
    bins_obj = eval_obj["bins"]
    bins = SimilarityBins(
        edges=tuple(bins_obj["edges"]),
        bins=tuple(tuple(b) for b in bins_obj["bins"]),
        mu_s=tuple(bins_obj["mu_s"]),
        counts=tuple(bins_obj["counts"]),
    )
    m_per_bin = [pooled_m(members) for members in bins.bins]
    try:
        o_geom = geometric_overfitting(bins, m_per_bin)
    except (ConfigError, DegenerateRange) as exc:
        o_geom = None
    payload = {
        "m_close_star": m_close,
        "m_far_star": m_far,
        "o_loc": o_loc,
        "o_loc_pct": o_loc * 100.0 if o_loc is not None else None,
        "bin_table": [
            {"mu_s": mu, "m": m, "count": w}
            for mu, m, w in zip(bins.mu_s, m_per_bin, bins.counts)
        ],
        "o_geom": o_geom,
        "o_geom_pct": o_geom * 100.0 if o_geom is not None else None,
    }
    _write_json(Path(args.out) / "overfit.json", payload)
    print(f"overfit: o_loc {o_loc}, o_geom {o_geom}")
    return 0


def _cmd_diversity(args) -> int:
    samples, _ = load_dataset(args.dataset)
    workers = _simmatrix.resolve_workers(args.workers)
    value = geomdiv(samples, args.delta, args.n_pts, workers)
    print(f"geomdiv: {value!r} m over {len(samples)} samples")
    if args.out:
        _write_json(
            Path(args.out) / "diversity.json",
            {"geomdiv": value, "n_samples": len(samples), "delta": args.delta, "n_pts": args.n_pts},
        )
    return 0


def _cmd_geomsim(args) -> int:
    a, _ = load_dataset(args.a)
    b, _ = load_dataset(args.b)
    workers = _simmatrix.resolve_workers(args.workers)
    matrix = cross_similarity(a, b, args.delta, args.n_pts, workers)
    cov_ab = float(matrix.values.min(axis=1).mean())
    cov_ba = float(matrix.values.min(axis=0).mean())
    value = 0.5 * (cov_ab + cov_ba)
    print(f"geomsim: {value!r} m (cover a->b {cov_ab!r}, b->a {cov_ba!r})")
    if args.out:
        _write_json(
            Path(args.out) / "geomsim.json",
            {"geomsim": value, "cover_a_to_b": cov_ab, "cover_b_to_a": cov_ba},
        )
    return 0


def _cmd_sparsify(args) -> int:
    samples, _ = load_dataset(args.dataset)
    workers = _simmatrix.resolve_workers(args.workers)
    tree = mst(similarity_graph(samples, args.delta, args.n_pts, workers))
    result = sparsify_from_mst(tree, args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "retained_ids.txt").write_text("\n".join(result.retained_ids) + "\n")
    payload = {
        "threshold": args.threshold,
        "n_samples": len(samples),
        "n_retained": len(result.retained_ids),
        "clusters": [
            {"representative": c.representative, "members": list(c.member_ids)}
            for c in result.clusters
        ],
    }
    if args.sweep:
        total = tree.total_weight
        sweep = []
        by_id = {s.sample_id: s for s in samples}
        for threshold in SWEEP_THRESHOLDS:
            res = sparsify_from_mst(tree, threshold)
            kept = [by_id[sid] for sid in res.retained_ids]
            div = geomdiv(kept, args.delta, args.n_pts, workers) if len(kept) > 1 else 0.0
            sweep.append(
                {
                    "threshold": threshold,
                    "remaining": len(res.retained_ids),
                    "remaining_pct": 100.0 * len(res.retained_ids) / len(samples),
                    "geomdiv": div,
                    "geomdiv_pct": 100.0 * div / total if total > 0 else None,
                }
            )
        payload["sweep"] = sweep
    _write_json(out / "sparsify.json", payload)
    print(
        f"sparsify: kept {len(result.retained_ids)} of {len(samples)} samples "
        f"at threshold {args.threshold}"
    )
    return 0


def _cmd_make_split(args) -> int:
    samples, _ = load_dataset(args.dataset)
    workers = _simmatrix.resolve_workers(args.workers)
    if len(args.fractions) != 3:
        raise ConfigError(f"--fractions needs 3 values, got {len(args.fractions)}")
    tree = mst(similarity_graph(samples, args.delta, args.n_pts, workers))
    split = split_from_mst(tree, tuple(args.fractions), args.tolerance, args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, ids in (
        ("train_ids.txt", split.train_ids),
        ("val_ids.txt", split.val_ids),
        ("test_ids.txt", split.test_ids),
    ):
        (out / name).write_text("\n".join(ids) + "\n")
    _write_json(
        out / "split.json",
        {
            "sizes": [len(split.train_ids), len(split.val_ids), len(split.test_ids)],
            "fractions": list(args.fractions),
            "cut_edges": [list(e) for e in split.cut_edges],
            "score": split.score,
        },
    )
    print(
        f"make-split: {len(split.train_ids)}/{len(split.val_ids)}/{len(split.test_ids)} "
        f"(score {split.score:.4f})"
    )
    return 0


def _cmd_topo_stats(args) -> int:
    train, _ = load_dataset(args.train)
    val, _ = load_dataset(args.val)
    rows = []
    for v in val:
        value, nearest = s_topo(v, train, args.k_top, args.lam, args.delta, args.n_pts)
        rows.append({"id": v.sample_id, "s_topo": value, "nearest_by_s_topo": nearest})
    payload = {
        "config": {
            "k_top": args.k_top,
            "lambda": args.lam,
            "delta": args.delta,
            "n_pts": args.n_pts,
        },
        "per_sample": rows,
    }
    _write_json(Path(args.out) / "topo_stats.json", payload)
    print(f"topo-stats: {len(rows)} validation samples")
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(
        mode=args.mode,
        val_count=args.val_count,
        predictions=args.preds,
        noise_sigma=args.noise_sigma,
        clusters=args.clusters,
        cluster_size=args.cluster_size,
        jitter=args.jitter,
    )
    samples, preds = synth_generate(args.seed, args.n_samples, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out / "full.jsonl", samples, config.class_table)
    n_train = args.n_samples - args.val_count
    save_dataset(out / "train.jsonl", samples[:n_train], config.class_table)
    if args.val_count:
        save_dataset(out / "val.jsonl", samples[n_train:], config.class_table)
    if preds:
        by_id = {s.sample_id: s for s in samples}
        save_predictions(out / "preds.jsonl", preds, by_id, config.class_table)
    _write_json(
        out / "synth.json",
        {
            "seed": args.seed,
            "n_samples": args.n_samples,
            "mode": args.mode,
            "val_count": args.val_count,
            "predictions": args.preds,
            "clusters": args.clusters,
            "cluster_size": args.cluster_size,
            "jitter": args.jitter,
        },
    )
    print(f"synth: wrote {args.n_samples} samples to {out}")
    return 0


def _cmd_report(args) -> int:
    workers = _simmatrix.resolve_workers(args.workers)
    train, class_table = load_dataset(args.train)
    val, _ = load_dataset(args.val)
    preds = None
    if args.preds:
        preds = load_predictions(args.preds, [v.sample_id for v in val])
    config = ReportConfig(
        delta=args.delta,
        n_pts=args.n_pts,
        t_dist=args.t_dist,
        kl_max=args.kl_max,
        min_pairs=args.min_pairs,
        bins=args.bins,
        taus=tuple(args.taus),
        conf_min=args.conf_min,
        k_top=args.k_top,
        lam=args.lam,
        workers=workers,
        with_topo=args.topo,
    )
    out = Path(args.out)
    report = build_report(
        train, val, preds, class_table, config, cache_path=out / "sim_val_x_train.gsim"
    )
    write_report_files(report, out, args.plots)
    print(f"report: wrote {out / 'report.json'}")
    return 0


_COMMANDS = {
    "stats": _cmd_stats,
    "eval-sets": _cmd_eval_sets,
    "metrics": _cmd_metrics,
    "overfit": _cmd_overfit,
    "diversity": _cmd_diversity,
    "geomsim": _cmd_geomsim,
    "sparsify": _cmd_sparsify,
    "make-split": _cmd_make_split,
    "topo-stats": _cmd_topo_stats,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except MapSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
