"""Run configuration: model dimensions, training hyperparameters, file io.

Defaults follow the reference setup: 2 s of history and 3 s of future at
10 Hz, 4 agents, 10 lanes of 100 points, 6 prediction heads, 20 feature
cycles, hidden width 64, loss weight 0.5, Adam at 1e-5 for 50 epochs with
batches of 512.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import IO

MAP_MODES = ("none", "raw", "invariant")


@dataclass(frozen=True)
class Config:
    t_in: int = 20
    t_out: int = 30
    num_agents: int = 4
    num_lanes: int = 10
    lane_points: int = 100
    num_heads: int = 6
    num_cycles: int = 20
    hidden_dim: int = 64
    beta: float = 0.5
    learning_rate: float = 1e-5
    epochs: int = 50
    batch_size: int = 512
    map_mode: str = "invariant"
    seed: int = 0
    miss_threshold: float = 2.0
    sample_rate_hz: float = 10.0

    def __post_init__(self):
        for name in (
            "t_in",
            "t_out",
            "num_agents",
            "num_lanes",
            "lane_points",
            "num_heads",
            "num_cycles",
            "hidden_dim",
            "learning_rate",
            "epochs",
            "batch_size",
            "miss_threshold",
            "sample_rate_hz",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"config: {name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"config: beta must lie in [0, 1], got {self.beta}")
        if self.map_mode not in MAP_MODES:
            raise ValueError(f"config: map_mode must be one of {MAP_MODES}, got {self.map_mode!r}")

    @property
    def geom_channels(self) -> int:
        # one coordinate-valued channel per history step
        return self.t_in

    def replace(self, **kwargs) -> "Config":
        return dataclasses.replace(self, **kwargs)


_INT_FIELDS = {f.name for f in dataclasses.fields(Config) if f.type == "int"}
_FLOAT_FIELDS = {f.name for f in dataclasses.fields(Config) if f.type == "float"}


def format_config(config: Config) -> str:
    """Render as the flat ``key = value`` text format (round-trip exact)."""
    lines = []
    for f in dataclasses.fields(Config):
        v = getattr(config, f.name)
        text = format(v, ".17g") if isinstance(v, float) else str(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> Config:
    """Parse the flat key = value format; unknown keys are rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in _INT_FIELDS:
            values[key] = int(val)
        elif key in _FLOAT_FIELDS:
            values[key] = float(val)
        elif key in ("map_mode",):
            values[key] = val
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return Config(**values)


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def save_config(config: Config, path_or_stream: str | Path | IO[str]) -> None:
    text = format_config(config)
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text)
