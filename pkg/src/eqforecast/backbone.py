"""Equivariant interaction backbone.

State per agent is a pair (G, H): G holds C coordinate channels that move
with the scene under SE(2), H holds an invariant feature vector.  Geometric
layers update G through channel mixing about the agent's own channel mean
plus edge-weighted relative interaction terms, scaled by a bounded positive
gate of invariants; pattern layers update H residually from neighbour
features and channel norms.  Both layers of a cycle read the previous
cycle's state (parallel update).
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .autodiff import (
    Value,
    add,
    concat,
    constant,
    l2norm,
    matmul,
    mul,
    reshape,
    scalar_affine,
    sigmoid,
    sub,
    vmean,
    vsum,
)
from .config import Config
from .layers import ModelParams, apply_mlp, channel_mix_array, mlp_arrays, mlp_dims
from .mapenc import encode_map_batch


def history_descriptors(histories: np.ndarray, agent_mask: np.ndarray) -> np.ndarray:
    """Rigid-motion invariants per agent history: (B, A, 2*T_in - 3).

    T_in-1 step lengths followed by T_in-2 turning angles; masked agents zero.
    """
    step = np.diff(histories, axis=-2)
    lengths = np.linalg.norm(step, axis=-1)
    a, b = step[..., :-1, :], step[..., 1:, :]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = np.sum(a * b, axis=-1)
    angles = np.arctan2(cross, dot)
    desc = np.concatenate([lengths, angles], axis=-1)
    return desc * agent_mask[..., None]


# Interaction weights start damped but non-degenerate: the cross-agent terms
# are the only source of off-axis geometry at initialisation, and decoder
# heads need that lateral basis for winner-take-all training to de-collapse.
EDGE_INIT_SCALE = 0.1


def backbone_param_arrays(config: Config, rng: np.random.Generator) -> "OrderedDict[str, np.ndarray]":
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    h, c, t = config.hidden_dim, config.geom_channels, config.t_in
    out["backbone.time_mix"] = channel_mix_array(rng, c, t)
    mlp_arrays(rng, "backbone.h0", mlp_dims(2 * t - 3, h, h), out)
    mlp_arrays(rng, "backbone.fuse", mlp_dims(2 * h, h, h), out)
    mlp_arrays(rng, "backbone.edge", mlp_dims(2 * h + 1, h, 1), out, final_scale=EDGE_INIT_SCALE)
    for q in range(config.num_cycles):
        p = f"backbone.cycle{q}"
        out[f"{p}.w_self"] = channel_mix_array(rng, c, c)
        out[f"{p}.w_int"] = channel_mix_array(rng, c, c)
        mlp_arrays(rng, f"{p}.gate", mlp_dims(h + c, h, c), out, final_scale=0.01)
        mlp_arrays(rng, f"{p}.nb", mlp_dims(h + 1, h, h), out)
        mlp_arrays(rng, f"{p}.update", mlp_dims(2 * h + c, h, h), out)
    return out


def _broadcast_agents(x: Value, shape: tuple[int, ...]) -> Value:
    """Materialise a broadcast view by adding a zero constant."""
    return add(x, constant(np.zeros(shape)))


def init_features_batch(
    params: ModelParams, histories: np.ndarray, agent_mask: np.ndarray, config: Config
) -> tuple[Value, Value]:
    """Initial state (G0, H0) from observed histories.

    G0 mixes centred history points across time into C coordinate channels
    and restores the per-agent mean, so it transforms exactly like the
    input points.  H0 embeds the invariant history descriptors.
    """
    mean = histories.mean(axis=2, keepdims=True)
    centered = constant(histories - mean)
    g0 = add(matmul(params["backbone.time_mix"], centered), constant(mean))
    desc = history_descriptors(histories, agent_mask)
    h0 = apply_mlp(params, "backbone.h0", constant(desc))
    h0 = mul(h0, constant(agent_mask[..., None]))
    return g0, h0


def fuse_map_batch(
    params: ModelParams, h: Value, map_code: Value, agent_mask: np.ndarray
) -> Value:
    """Blend the pooled map code into every agent's invariant features."""
    B, A = h.shape[0], h.shape[1]
    code = _broadcast_agents(reshape(map_code, (B, 1, map_code.shape[-1])), (B, A, map_code.shape[-1]))
    fused = apply_mlp(params, "backbone.fuse", concat([h, code], axis=-1))
    return mul(fused, constant(agent_mask[..., None]))


def _pair_distances(g: Value) -> Value:
    """Distances between agent channel means: Value (B, A, A, 1)."""
    gbar = vmean(g, axis=2)
    B, A = gbar.shape[0], gbar.shape[1]
    gi = reshape(gbar, (B, A, 1, 2))
    gj = reshape(gbar, (B, 1, A, 2))
    return l2norm(sub(gi, gj), keepdims=True)


def pair_mask(agent_mask: np.ndarray) -> np.ndarray:
    """Valid ordered pairs (i, j), i != j: (B, A, A)."""
    m = agent_mask[:, :, None] * agent_mask[:, None, :]
    return m * (1.0 - np.eye(agent_mask.shape[1]))


def edge_weights_batch(
    params: ModelParams, g: Value, h: Value, agent_mask: np.ndarray
) -> Value:
    """Scalar interaction weight per ordered agent pair: Value (B, A, A).

    Inputs to the edge MLP are both agents' invariant features and their
    separation, so the weights themselves are invariants.  Pairs involving
    a masked agent, and the diagonal, are exactly zero.
    """
    B, A = h.shape[0], h.shape[1]
    hi = _broadcast_agents(reshape(h, (B, A, 1, h.shape[-1])), (B, A, A, h.shape[-1]))
    hj = _broadcast_agents(reshape(h, (B, 1, A, h.shape[-1])), (B, A, A, h.shape[-1]))
    feats = concat([hi, hj, _pair_distances(g)], axis=-1)
    e = reshape(apply_mlp(params, "backbone.edge", feats), (B, A, A))
    return mul(e, constant(pair_mask(agent_mask)))


def _bounded_gate(params: ModelParams, name: str, feats: Value) -> Value:
    """Positive gate in (0, 2), equal to 1 when the MLP outputs zero."""
    return scalar_affine(sigmoid(apply_mlp(params, name, feats)), 2.0, 0.0)


def geometric_layer_batch(
    params: ModelParams, cycle: int, g: Value, h: Value, edges: Value, config: Config
) -> Value:
    """One equivariant update of the coordinate channels."""
    B, A, C = g.shape[0], g.shape[1], g.shape[2]
    p = f"backbone.cycle{cycle}"
    mean = vmean(g, axis=2, keepdims=True)
    self_term = matmul(params[f"{p}.w_self"], sub(g, mean))
    rel = sub(reshape(g, (B, 1, A, C, 2)), reshape(mean, (B, A, 1, 1, 2)))
    mixed = matmul(params[f"{p}.w_int"], rel)
    inter = vsum(mul(mixed, reshape(edges, (B, A, A, 1, 1))), axis=2)
    update = add(self_term, inter)
    gate = _bounded_gate(params, f"{p}.gate", concat([h, l2norm(update)], axis=-1))
    return add(mul(update, reshape(gate, (B, A, C, 1))), mean)


def pattern_layer_batch(
    params: ModelParams, cycle: int, g: Value, h: Value, agent_mask: np.ndarray, config: Config
) -> Value:
    """One residual update of the invariant features."""
    B, A = h.shape[0], h.shape[1]
    p = f"backbone.cycle{cycle}"
    hj = _broadcast_agents(reshape(h, (B, 1, A, h.shape[-1])), (B, A, A, h.shape[-1]))
    nb = apply_mlp(params, f"{p}.nb", concat([hj, _pair_distances(g)], axis=-1))
    pm = pair_mask(agent_mask)
    weights = pm / np.maximum(pm.sum(axis=2, keepdims=True), 1.0)
    agg = vsum(mul(nb, constant(weights[..., None])), axis=2)
    norms = l2norm(sub(g, vmean(g, axis=2, keepdims=True)))
    update = apply_mlp(params, f"{p}.update", concat([h, agg, norms], axis=-1))
    return add(h, mul(update, constant(agent_mask[..., None])))


def run_backbone_batch(
    params: ModelParams,
    histories: np.ndarray,
    agent_mask: np.ndarray,
    maps: np.ndarray,
    lane_mask: np.ndarray,
    config: Config,
) -> tuple[Value, Value, dict]:
    """Full backbone pass: returns final (G, H) and an aux dict for probes."""
    g, h = init_features_batch(params, histories, agent_mask, config)
    code = encode_map_batch(params, maps, lane_mask, config)
    h = fuse_map_batch(params, h, code, agent_mask)
    edges = edge_weights_batch(params, g, h, agent_mask)
    for q in range(config.num_cycles):
        g_next = geometric_layer_batch(params, q, g, h, edges, config)
        h_next = pattern_layer_batch(params, q, g, h, agent_mask, config)
        g, h = g_next, h_next
    return g, h, {"edges": edges}
