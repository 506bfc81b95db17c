"""Line-oriented text formats for scenes and forecasts.

Coordinates are written with 17 significant digits, which round-trips
float64 exactly, so write-then-read reproduces arrays bit for bit.  The
readers are strict: structural problems raise ``FileFormatError`` naming
the file and line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .scene import ForecastSet, GroundTruth, Scene

SCENE_MAGIC = "eqforecast-scene 1"
FORECAST_MAGIC = "eqforecast-forecast 1"


class FileFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class _Reader:
    """Sequential line reader with one-based positions for error messages."""

    def __init__(self, path: Path):
        self.name = str(path)
        self.lines = path.read_text().splitlines()
        self.pos = 0

    def error(self, message: str) -> "FileFormatError":
        return FileFormatError(f"{self.name}:{self.pos}: {message}")

    def next_line(self) -> str:
        if self.pos >= len(self.lines):
            self.pos += 1
            raise self.error("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line.strip()

    def expect(self, literal: str) -> None:
        line = self.next_line()
        if line != literal:
            raise self.error(f"expected {literal!r}, got {line!r}")

    def key_int(self, key: str) -> int:
        line = self.next_line()
        head, _, raw = line.partition(" ")
        if head != key:
            raise self.error(f"expected key {key!r}, got {line!r}")
        try:
            return int(raw)
        except ValueError:
            raise self.error(f"bad integer for {key!r}: {raw!r}") from None

    def key_float(self, key: str) -> float:
        line = self.next_line()
        head, _, raw = line.partition(" ")
        if head != key:
            raise self.error(f"expected key {key!r}, got {line!r}")
        try:
            return float(raw)
        except ValueError:
            raise self.error(f"bad number for {key!r}: {raw!r}") from None

    def floats(self, count: int) -> list[float]:
        line = self.next_line()
        parts = line.split()
        if len(parts) != count:
            raise self.error(f"expected {count} numbers, got {len(parts)}")
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise self.error(f"bad number in {line!r}") from None

    def point_block(self, count: int) -> np.ndarray:
        return np.array([self.floats(2) for _ in range(count)])

    def done(self) -> None:
        for i in range(self.pos, len(self.lines)):
            if self.lines[i].strip():
                self.pos = i + 1
                raise self.error(f"trailing content {self.lines[i].strip()!r}")


def write_scene(
    scene: Scene, truth: GroundTruth | None, path, rate_hz: float = 10.0
) -> None:
    a, t_in = scene.histories.shape[:2]
    l, k = scene.map_polylines.shape[:2]
    t_out = truth.futures.shape[1] if truth is not None else 0
    out = [SCENE_MAGIC]
    out.append(f"A {a}")
    out.append(f"T_in {t_in}")
    out.append(f"T_out {t_out}")
    out.append(f"L {l}")
    out.append(f"K {k}")
    out.append(f"rate_hz {_fmt(rate_hz)}")
    out.append(f"futures {1 if truth is not None else 0}")
    for i in range(a):
        out.append(f"agent {i} mask {int(scene.agent_mask[i])}")
        for p in scene.histories[i]:
            out.append(f"{_fmt(p[0])} {_fmt(p[1])}")
        if truth is not None:
            for p in truth.futures[i]:
                out.append(f"{_fmt(p[0])} {_fmt(p[1])}")
    for j in range(l):
        out.append(f"lane {j} mask {int(scene.lane_mask[j])}")
        for p in scene.map_polylines[j]:
            out.append(f"{_fmt(p[0])} {_fmt(p[1])}")
    Path(path).write_text("\n".join(out) + "\n")


def read_scene(path) -> tuple[Scene, GroundTruth | None]:
    r = _Reader(Path(path))
    r.expect(SCENE_MAGIC)
    a = r.key_int("A")
    t_in = r.key_int("T_in")
    t_out = r.key_int("T_out")
    l = r.key_int("L")
    k = r.key_int("K")
    r.key_float("rate_hz")
    has_truth = r.key_int("futures")
    if has_truth not in (0, 1):
        raise r.error(f"futures flag must be 0 or 1, got {has_truth}")
    if min(a, t_in, l, k) <= 0 or t_out < 0:
        raise r.error("all dimensions must be positive")
    if has_truth and t_out <= 0:
        raise r.error("futures present but T_out is zero")
    histories = np.zeros((a, t_in, 2))
    futures = np.zeros((a, t_out, 2)) if has_truth else None
    agent_mask = np.zeros(a)
    for i in range(a):
        line = r.next_line()
        parts = line.split()
        if len(parts) != 4 or parts[0] != "agent" or parts[2] != "mask":
            raise r.error(f"expected agent header, got {line!r}")
        if int(parts[1]) != i:
            raise r.error(f"agent {i} out of order: {line!r}")
        if parts[3] not in ("0", "1"):
            raise r.error(f"mask must be 0 or 1, got {parts[3]!r}")
        agent_mask[i] = float(parts[3])
        histories[i] = r.point_block(t_in)
        if has_truth:
            futures[i] = r.point_block(t_out)
    lane_mask = np.zeros(l)
    maps = np.zeros((l, k, 2))
    for j in range(l):
        line = r.next_line()
        parts = line.split()
        if len(parts) != 4 or parts[0] != "lane" or parts[2] != "mask":
            raise r.error(f"expected lane header, got {line!r}")
        if int(parts[1]) != j:
            raise r.error(f"lane {j} out of order: {line!r}")
        if parts[3] not in ("0", "1"):
            raise r.error(f"mask must be 0 or 1, got {parts[3]!r}")
        lane_mask[j] = float(parts[3])
        maps[j] = r.point_block(k)
    r.done()
    scene = Scene(
        histories=histories, agent_mask=agent_mask, map_polylines=maps, lane_mask=lane_mask
    )
    truth = None
    if has_truth:
        truth = GroundTruth(futures=futures, agent_mask=agent_mask.copy())
    return scene, truth


def write_forecast(forecast_set: ForecastSet, selected: np.ndarray, path) -> None:
    a, h, t_out = forecast_set.trajectories.shape[:3]
    out = [FORECAST_MAGIC]
    out.append(f"A {a}")
    out.append(f"H {h}")
    out.append(f"T_out {t_out}")
    for i in range(a):
        out.append(f"agent {i} selected {int(selected[i])}")
        out.append("prob " + " ".join(_fmt(p) for p in forecast_set.probabilities[i]))
        for head in range(h):
            out.append(f"head {head}")
            for p in forecast_set.trajectories[i, head]:
                out.append(f"{_fmt(p[0])} {_fmt(p[1])}")
    Path(path).write_text("\n".join(out) + "\n")


def read_forecast(path) -> tuple[ForecastSet, np.ndarray]:
    r = _Reader(Path(path))
    r.expect(FORECAST_MAGIC)
    a = r.key_int("A")
    h = r.key_int("H")
    t_out = r.key_int("T_out")
    if min(a, h, t_out) <= 0:
        raise r.error("all dimensions must be positive")
    trajectories = np.zeros((a, h, t_out, 2))
    probabilities = np.zeros((a, h))
    selected = np.zeros(a, dtype=np.int64)
    for i in range(a):
        line = r.next_line()
        parts = line.split()
        if len(parts) != 4 or parts[0] != "agent" or parts[2] != "selected":
            raise r.error(f"expected agent header, got {line!r}")
        if int(parts[1]) != i:
            raise r.error(f"agent {i} out of order: {line!r}")
        sel = int(parts[3])
        if not 0 <= sel < h:
            raise r.error(f"selected head {sel} outside [0, {h})")
        selected[i] = sel
        line = r.next_line()
        head_tok, _, rest = line.partition(" ")
        if head_tok != "prob":
            raise r.error(f"expected probabilities, got {line!r}")
        parts = rest.split()
        if len(parts) != h:
            raise r.error(f"expected {h} probabilities, got {len(parts)}")
        probabilities[i] = [float(p) for p in parts]
        for head in range(h):
            r.expect(f"head {head}")
            trajectories[i, head] = r.point_block(t_out)
    r.done()
    return ForecastSet(trajectories=trajectories, probabilities=probabilities), selected


def load_scene_dir(path) -> list[tuple[Scene, GroundTruth | None]]:
    """Read every ``*.txt`` scene file in a directory, sorted by name."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"scene directory not found: {root}")
    return [read_scene(p) for p in sorted(root.glob("*.txt"))]


def save_scene_dir(pairs, path, rate_hz: float = 10.0) -> list[Path]:
    """Write scenes as scene_00000.txt, scene_00001.txt, ... under path."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for i, (scene, truth) in enumerate(pairs):
        target = root / f"scene_{i:05d}.txt"
        write_scene(scene, truth, target, rate_hz=rate_hz)
        written.append(target)
    return written
