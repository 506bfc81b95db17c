"""Minimal CSV trajectory ingestion.

Expected columns: ``timestamp``, ``track_id``, ``x``, ``y``, ``focal``
(hyphenated spellings accepted).  Exactly one track carries the focal
flag; it becomes agent 0.  Tracks are linearly resampled onto the
configured 10 Hz grid anchored at the focal track's final timestamp, the
A-1 nearest complete tracks at the last observed step fill the remaining
agent slots, and missing slots are masked with zero padding.  The CSV
carries no map data, so all lanes are masked.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import numpy as np

from .config import Config
from .scene import GroundTruth, Scene

COLUMNS = ("timestamp", "track_id", "x", "y", "focal")
_TIME_SLACK = 1e-9


class IngestWarning(UserWarning):
    pass


class IngestError(ValueError):
    pass


def _read_tracks(path: Path) -> tuple[dict[str, np.ndarray], str]:
    """Parse rows into per-track (T, 3) arrays of (t, x, y); find the focal id."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        names = [n.strip().lower().replace("-", "_") for n in reader.fieldnames]
        if sorted(names) != sorted(COLUMNS):
            raise IngestError(
                f"{path}: expected columns {list(COLUMNS)}, got {names}"
            )
        rows: dict[str, list[tuple[float, float, float]]] = {}
        focal_flags: dict[str, set[str]] = {}
        for lineno, raw in enumerate(reader, start=2):
            row = {k: v.strip() for k, v in zip(names, [raw[f] for f in reader.fieldnames])}
            try:
                t = float(row["timestamp"])
                x = float(row["x"])
                y = float(row["y"])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: bad number in row") from None
            if row["focal"] not in ("0", "1"):
                raise IngestError(
                    f"{path}:{lineno}: focal flag must be 0 or 1, got {row['focal']!r}"
                )
            tid = row["track_id"]
            rows.setdefault(tid, []).append((t, x, y))
            focal_flags.setdefault(tid, set()).add(row["focal"])
    if not rows:
        raise IngestError(f"{path}: no data rows")
    for tid, flags in focal_flags.items():
        if len(flags) > 1:
            raise IngestError(f"{path}: track {tid!r} mixes focal flags")
    focal_ids = [tid for tid, flags in focal_flags.items() if flags == {"1"}]
    if len(focal_ids) != 1:
        raise IngestError(
            f"{path}: expected exactly one focal track, found {len(focal_ids)}"
        )
    tracks: dict[str, np.ndarray] = {}
    for tid, entries in rows.items():
        arr = np.array(sorted(entries), dtype=np.float64)
        if np.any(np.diff(arr[:, 0]) <= 0.0):
            raise IngestError(f"{path}: track {tid!r} has duplicate timestamps")
        tracks[tid] = arr
    return tracks, focal_ids[0]


def _covers(track: np.ndarray, grid: np.ndarray) -> bool:
    return (
        track[0, 0] <= grid[0] + _TIME_SLACK and track[-1, 0] >= grid[-1] - _TIME_SLACK
    )


def _resample(track: np.ndarray, grid: np.ndarray) -> np.ndarray:
    x = np.interp(grid, track[:, 0], track[:, 1])
    y = np.interp(grid, track[:, 0], track[:, 2])
    return np.stack([x, y], axis=-1)


def ingest_csv(path, config: Config) -> list[tuple[Scene, GroundTruth]]:
    """One scene per file; an under-long focal track yields a skip warning."""
    path = Path(path)
    tracks, focal_id = _read_tracks(path)
    n = config.t_in + config.t_out
    dt = 1.0 / config.sample_rate_hz
    t_end = tracks[focal_id][-1, 0]
    grid = t_end - (n - 1 - np.arange(n)) * dt
    if not _covers(tracks[focal_id], grid):
        warnings.warn(
            f"{path}: skipped 1 scene, focal track {focal_id!r} shorter than "
            f"{n} samples at {config.sample_rate_hz:g} Hz",
            IngestWarning,
            stacklevel=2,
        )
        return []
    focal_points = _resample(tracks[focal_id], grid)
    anchor = focal_points[config.t_in - 1]
    candidates = []
    for tid, track in tracks.items():
        if tid == focal_id or not _covers(track, grid):
            continue
        points = _resample(track, grid)
        dist = float(np.linalg.norm(points[config.t_in - 1] - anchor))
        candidates.append((dist, tid, points))
    candidates.sort(key=lambda item: (item[0], item[1]))
    chosen = candidates[: config.num_agents - 1]

    a = config.num_agents
    histories = np.zeros((a, config.t_in, 2))
    futures = np.zeros((a, config.t_out, 2))
    agent_mask = np.zeros(a)
    histories[0] = focal_points[: config.t_in]
    futures[0] = focal_points[config.t_in :]
    agent_mask[0] = 1.0
    for slot, (_, _, points) in enumerate(chosen, start=1):
        histories[slot] = points[: config.t_in]
        futures[slot] = points[config.t_in :]
        agent_mask[slot] = 1.0
    scene = Scene(
        histories=histories,
        agent_mask=agent_mask,
        map_polylines=np.zeros((config.num_lanes, config.lane_points, 2)),
        lane_mask=np.zeros(config.num_lanes),
    )
    truth = GroundTruth(futures=futures, agent_mask=agent_mask.copy())
    return [(scene, truth)]
