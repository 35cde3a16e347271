"""Shared fixtures plus a per-criterion summary for the acceptance gate."""

from __future__ import annotations

import re

import numpy as np
import pytest

from mapsim import MapElement, Sample

_CRITERION_PATTERN = re.compile(r"test_criterion_(\d+)_(\w+)")
_criterion_results: dict[int, tuple[str, str]] = {}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def make_line(verts, class_id: int = 0) -> MapElement:
    return MapElement(class_id, "polyline", np.asarray(verts, dtype=np.float64))


def make_polygon(verts, class_id: int = 2) -> MapElement:
    return MapElement(class_id, "polygon", np.asarray(verts, dtype=np.float64))


def make_sample(sample_id: str, elements, ego=(0.0, 0.0), map_name="m", fov=(30.0, 15.0)) -> Sample:
    return Sample(
        sample_id=sample_id,
        log_id="log0",
        map_name=map_name,
        ego_xy=np.asarray(ego, dtype=np.float64),
        ego_yaw=0.0,
        fov=fov,
        elements=tuple(elements),
    )


def random_line(rng: np.random.Generator, n_verts: int | None = None, scale: float = 10.0) -> MapElement:
    n = n_verts or int(rng.integers(2, 9))
    start = rng.uniform(-scale, scale, 2)
    steps = rng.uniform(0.3, 2.0, (n - 1, 1)) * _unit_steps(rng, n - 1)
    verts = np.vstack([start, start + np.cumsum(steps, axis=0)])
    return MapElement(int(rng.integers(0, 2)), "polyline", verts)


def _unit_steps(rng: np.random.Generator, count: int) -> np.ndarray:
    angles = rng.uniform(0, 2 * np.pi, count)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def random_polygon(rng: np.random.Generator, n_verts: int | None = None, scale: float = 10.0) -> MapElement:
    n = n_verts or int(rng.integers(3, 8))
    center = rng.uniform(-scale, scale, 2)
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(1.0, 3.0, n)
    verts = center + np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return MapElement(2, "polygon", verts)


def random_sample(rng: np.random.Generator, sample_id: str, ego=None, map_name="m") -> Sample:
    elements = []
    for _ in range(int(rng.integers(1, 4))):
        elements.append(random_line(rng))
    if rng.uniform() < 0.5:
        elements.append(random_polygon(rng))
    ego_xy = np.asarray(ego, dtype=np.float64) if ego is not None else rng.uniform(-50, 50, 2)
    return make_sample(sample_id, elements, ego=ego_xy, map_name=map_name, fov=(60.0, 60.0))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    m = _CRITERION_PATTERN.search(item.name)
    if not m:
        return
    label = m.group(2).replace("_", " ")
    _criterion_results[int(m.group(1))] = (label, report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_criterion_results):
        label, outcome = _criterion_results[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {label}: {status}")
