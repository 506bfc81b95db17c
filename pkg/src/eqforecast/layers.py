"""Learnable-map plumbing shared by the map encoder, backbone and decoder.

Parameters live in a flat ordered mapping from dotted names (for example
``backbone.cycle3.gate.w0``) to trainable leaves.  Every invariant MLP in
the model follows one shape rule: two hidden layers of ``hidden_dim`` with
relu between, linear output.  Channel-mixing matrices act on the channel
axis of coordinate-valued features and carry no bias (a bias would break
translation equivariance).
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Mapping

import numpy as np

from .autodiff import Value, add, matmul, param, relu


class ModelParams:
    """Ordered, name-addressed collection of trainable leaves."""

    def __init__(self, values: "OrderedDict[str, Value]"):
        self._values = values

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        return cls(OrderedDict((name, param(a)) for name, a in arrays.items()))

    def __getitem__(self, name: str) -> Value:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def names(self) -> list[str]:
        return list(self._values)

    def leaves(self) -> list[Value]:
        return list(self._values.values())

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, v.data) for name, v in self._values.items())

    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(v.data.size for v in self._values.values())

    def count_by_group(self) -> "OrderedDict[str, int]":
        """Parameter counts keyed by top-level name component."""
        out: "OrderedDict[str, int]" = OrderedDict()
        for name, v in self._values.items():
            group = name.split(".", 1)[0]
            out[group] = out.get(group, 0) + v.data.size
        return out

    def subset_names(self, prefix: str) -> list[str]:
        return [n for n in self._values if n.startswith(prefix)]


# ---------------------------------------------------------------------------
# initialisation (all arrays, wrapped into leaves by ModelParams.from_arrays)


def linear_arrays(
    rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Weight and bias drawn uniformly from +-scale/sqrt(fan_in)."""
    bound = scale / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=(fan_out,))
    return w, b


def channel_mix_array(
    rng: np.random.Generator, out_channels: int, in_channels: int, noise: float = 0.01
) -> np.ndarray:
    """Near-identity channel mixer so early training preserves geometry."""
    return np.eye(out_channels, in_channels) + rng.uniform(
        -noise, noise, size=(out_channels, in_channels)
    )


def mlp_arrays(
    rng: np.random.Generator,
    name: str,
    dims: list[int],
    out: "OrderedDict[str, np.ndarray]",
    final_scale: float = 1.0,
) -> None:
    """Append weight/bias arrays for an MLP with the given layer widths.

    ``final_scale`` shrinks the last layer's initialisation; gate and edge
    networks start near zero so the backbone begins as a clean geometric map.
    """
    n = len(dims) - 1
    for i in range(n):
        scale = final_scale if i == n - 1 else 1.0
        w, b = linear_arrays(rng, dims[i], dims[i + 1], scale=scale)
        out[f"{name}.w{i}"] = w
        out[f"{name}.b{i}"] = b


def mlp_dims(fan_in: int, hidden: int, fan_out: int) -> list[int]:
    """The package-wide MLP shape: two hidden layers, linear output."""
    return [fan_in, hidden, hidden, fan_out]


# ---------------------------------------------------------------------------
# application


def linear(x: Value, w: Value, b: Value | None = None) -> Value:
    out = matmul(x, w)
    return out if b is None else add(out, b)


def apply_mlp(params: ModelParams, name: str, x: Value) -> Value:
    """Run the MLP stored under ``name`` (relu between layers, linear last)."""
    i = 0
    while f"{name}.w{i + 1}" in params:
        x = relu(linear(x, params[f"{name}.w{i}"], params[f"{name}.b{i}"]))
        i += 1
    return linear(x, params[f"{name}.w{i}"], params[f"{name}.b{i}"])
