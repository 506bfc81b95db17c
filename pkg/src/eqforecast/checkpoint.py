"""Versioned checkpoint container with byte-stable round-trips.

Layout: a text header (version, step, embedded config, tensor manifest)
followed by ``data`` and the raw little-endian float64 tensor payloads in
manifest order.  Serialization touches no timestamps or hashes, so
save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import io
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, format_config, parse_config

MAGIC = b"eqforecast-checkpoint 1\n"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: Config
    params: "OrderedDict[str, np.ndarray]"
    adam_m: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    adam_v: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    step: int = 0


def _tensor_items(ckpt: Checkpoint):
    for name, arr in ckpt.params.items():
        yield f"param/{name}", arr
    for name, arr in ckpt.adam_m.items():
        yield f"adam_m/{name}", arr
    for name, arr in ckpt.adam_v.items():
        yield f"adam_v/{name}", arr


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    config_bytes = format_config(ckpt.config).encode()
    items = list(_tensor_items(ckpt))
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(f"step {ckpt.step}\n".encode())
    out.write(f"config {len(config_bytes)}\n".encode())
    out.write(config_bytes)
    out.write(f"tensors {len(items)}\n".encode())
    for name, arr in items:
        dims = " ".join(str(d) for d in arr.shape)
        out.write(f"tensor {name} {arr.ndim}{' ' if dims else ''}{dims}\n".encode())
    out.write(b"data\n")
    for _, arr in items:
        out.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(out.getvalue())


def _read_line(buf: io.BytesIO, path) -> str:
    line = buf.readline()
    if not line.endswith(b"\n"):
        raise CheckpointError(f"{path}: truncated header")
    return line[:-1].decode()


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    buf = io.BytesIO(raw)
    if buf.read(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    step_line = _read_line(buf, path)
    if not step_line.startswith("step "):
        raise CheckpointError(f"{path}: expected step line, got {step_line!r}")
    step = int(step_line.split(" ", 1)[1])
    config_line = _read_line(buf, path)
    if not config_line.startswith("config "):
        raise CheckpointError(f"{path}: expected config line, got {config_line!r}")
    config_len = int(config_line.split(" ", 1)[1])
    config_text = buf.read(config_len).decode()
    config = parse_config(config_text)
    count_line = _read_line(buf, path)
    if not count_line.startswith("tensors "):
        raise CheckpointError(f"{path}: expected tensor count, got {count_line!r}")
    count = int(count_line.split(" ", 1)[1])
    manifest: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(count):
        parts = _read_line(buf, path).split(" ")
        if len(parts) < 3 or parts[0] != "tensor":
            raise CheckpointError(f"{path}: bad tensor line {' '.join(parts)!r}")
        name, ndim = parts[1], int(parts[2])
        dims = tuple(int(d) for d in parts[3:])
        if len(dims) != ndim:
            raise CheckpointError(f"{path}: tensor {name!r} dimension mismatch")
        manifest.append((name, dims))
    if _read_line(buf, path) != "data":
        raise CheckpointError(f"{path}: missing data marker")
    groups = {"param": OrderedDict(), "adam_m": OrderedDict(), "adam_v": OrderedDict()}
    for name, dims in manifest:
        size = int(np.prod(dims)) if dims else 1
        blob = buf.read(size * 8)
        if len(blob) != size * 8:
            raise CheckpointError(f"{path}: truncated payload for tensor {name!r}")
        arr = np.frombuffer(blob, dtype="<f8").astype(np.float64).reshape(dims)
        group, _, leaf = name.partition("/")
        if group not in groups or not leaf:
            raise CheckpointError(f"{path}: unknown tensor group in {name!r}")
        groups[group][leaf] = arr
    if buf.read(1):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return Checkpoint(
        config=config,
        params=groups["param"],
        adam_m=groups["adam_m"],
        adam_v=groups["adam_v"],
        step=step,
    )
