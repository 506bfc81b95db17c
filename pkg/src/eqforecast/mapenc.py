"""Map polyline encoding: per-lane tokens pooled through self-attention.

Each lane centerline becomes one token.  In ``invariant`` mode the token is
built from rigid-motion invariants of the polyline (segment lengths and
turning angles), so the pooled map code is unchanged by any SE(2) transform
of the scene.  ``raw`` mode feeds centroid-relative coordinates instead and
is deliberately not invariant; ``none`` disables the map pathway entirely.
"""

from __future__ import annotations

from collections import OrderedDict
from enum import Enum

import numpy as np

from .autodiff import Value, add, concat, constant, matmul, mul, scalar_affine, softmax, transpose, vsum
from .config import Config
from .layers import ModelParams, apply_mlp, linear, linear_arrays, mlp_arrays, mlp_dims

MASK_BIAS = -1e30


class MapMode(str, Enum):
    NONE = "none"
    RAW = "raw"
    INVARIANT = "invariant"


def lane_descriptors(maps: np.ndarray, lane_mask: np.ndarray) -> np.ndarray:
    """Rigid-motion invariants per lane: (B, L, 2K-3).

    K-1 consecutive segment lengths followed by K-2 turning angles between
    consecutive segments.  Rows of masked lanes are zero.
    """
    seg = np.diff(maps, axis=-2)
    lengths = np.linalg.norm(seg, axis=-1)
    a, b = seg[..., :-1, :], seg[..., 1:, :]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = np.sum(a * b, axis=-1)
    angles = np.arctan2(cross, dot)
    desc = np.concatenate([lengths, angles], axis=-1)
    return desc * lane_mask[..., None]


def lane_raw_tokens(maps: np.ndarray, lane_mask: np.ndarray) -> np.ndarray:
    """Flattened centroid-relative lane coordinates: (B, L, 2K)."""
    counts = lane_mask.sum(axis=1)
    total = (maps * lane_mask[:, :, None, None]).sum(axis=(1, 2))
    denom = np.maximum(counts * maps.shape[2], 1.0)
    centroid = total / denom[:, None]
    centered = (maps - centroid[:, None, None, :]) * lane_mask[:, :, None, None]
    return centered.reshape(maps.shape[0], maps.shape[1], -1)


def map_param_arrays(config: Config, rng: np.random.Generator) -> "OrderedDict[str, np.ndarray]":
    """Initial arrays for the lane-token MLP and the attention projections."""
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    mode = MapMode(config.map_mode)
    if mode is MapMode.NONE:
        return out
    h = config.hidden_dim
    if mode is MapMode.RAW:
        fan_in = 2 * config.lane_points
    else:
        fan_in = 2 * config.lane_points - 3
    mlp_arrays(rng, "map.lane", mlp_dims(fan_in, h, h), out)
    for proj in ("q", "k", "v"):
        w, b = linear_arrays(rng, h, h)
        out[f"map.{proj}.w"] = w
        out[f"map.{proj}.b"] = b
    return out


def encode_map_batch(
    params: ModelParams,
    maps: np.ndarray,
    lane_mask: np.ndarray,
    config: Config,
    return_attention: bool = False,
):
    """Pooled map code per scene: Value of shape (B, hidden_dim).

    Scaled dot-product self-attention over lane tokens; masked lanes get a
    large negative score bias as keys and are excluded from the mean pool,
    so a scene with no valid lanes encodes to the zero vector.
    """
    B = maps.shape[0]
    h = config.hidden_dim
    mode = MapMode(config.map_mode)
    if mode is MapMode.NONE:
        pooled = constant(np.zeros((B, h)))
        return (pooled, np.zeros((B, maps.shape[1], maps.shape[1]))) if return_attention else pooled

    if mode is MapMode.RAW:
        feats = lane_raw_tokens(maps, lane_mask)
    else:
        feats = lane_descriptors(maps, lane_mask)
    tokens = apply_mlp(params, "map.lane", constant(feats))

    q = linear(tokens, params["map.q.w"], params["map.q.b"])
    k = linear(tokens, params["map.k.w"], params["map.k.b"])
    v = linear(tokens, params["map.v.w"], params["map.v.b"])
    scores = scalar_affine(matmul(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(h), 0.0)
    # bias masked keys out of every query row
    key_bias = np.where(lane_mask[:, None, :] > 0.0, 0.0, MASK_BIAS)
    attn = softmax(add(scores, constant(key_bias)))
    ctx = matmul(attn, v)

    counts = np.maximum(lane_mask.sum(axis=1), 1.0)
    pool_w = (lane_mask / counts[:, None])[:, :, None]
    pooled = vsum(mul(ctx, constant(pool_w)), axis=1)
    if return_attention:
        return pooled, attn.data * lane_mask[:, :, None]
    return pooled


def encode_map(
    params: ModelParams, maps: np.ndarray, lane_mask: np.ndarray, config: Config
) -> Value:
    """Single-scene convenience wrapper: (L, K, 2) -> Value (hidden_dim,)."""
    pooled = encode_map_batch(params, maps[None], lane_mask[None], config)
    return pooled[0]
