"""Multi-head trajectory decoding and mode probability estimation.

Each of the H decoder heads maps the backbone's C coordinate channels to
T_out future points through bias-free channel mixing about the channel
mean, with norm-conditioned gates between layers and a learnable planar
rotation gain per layer; the construction keeps every head
SE(2)-equivariant.  Mode probabilities are computed from the
decoded trajectories through a stop-gradient boundary: trajectories are
re-expressed in a canonical frame fixed by their own geometry, scored by a
shared per-head network, and normalised with a softmax, which makes the
probabilities SE(2)-invariant and permutation-consistent across heads.
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
    softmax,
    sub,
    vmean,
)
from .backbone import backbone_param_arrays, run_backbone_batch
from .config import Config
from .layers import ModelParams, apply_mlp, channel_mix_array, mlp_arrays, mlp_dims
from .mapenc import map_param_arrays
from .scene import ForecastSet, Scene, validate_scene
from .scene import SceneValidationError

_CANON_EPS = 1e-12

# Decoder heads initialise visibly distinct so winner-take-all training can
# assign different futures to different heads instead of collapsing them all
# onto the conditional mean.
HEAD_INIT_NOISE = 0.1

# Spread of the per-head rotation gains at initialisation.  Each decoder
# layer maps centred coordinates through W plus a learnable multiple of the
# 90-degree rotation J (the full space of SE(2)-equivariant linear maps is
# exactly channel mixing combined with a*I + b*J, since J commutes with
# every planar rotation).  Seeding b with opposite signs on different heads
# breaks the left/right mirror symmetry that pure channel mixing of
# near-collinear histories cannot escape; a small spread is enough.
ROT_GAIN_SPREAD = 0.1

_ROT90 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def build_params(config: Config, seed: int | None = None) -> ModelParams:
    """Initialise every trainable array for the given configuration."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    arrays.update(map_param_arrays(config, rng))
    arrays.update(backbone_param_arrays(config, rng))
    h, c, t_out = config.hidden_dim, config.geom_channels, config.t_out
    widths = [c, h, h, h, t_out]
    for head in range(config.num_heads):
        p = f"decoder.head{head}"
        if config.num_heads > 1:
            lean = ROT_GAIN_SPREAD * (2 * head - (config.num_heads - 1)) / (config.num_heads - 1)
        else:
            lean = 0.0
        for i in range(4):
            arrays[f"{p}.mix{i}"] = channel_mix_array(
                rng, widths[i + 1], widths[i], noise=HEAD_INIT_NOISE
            )
            arrays[f"{p}.rot{i}"] = np.array([lean if i == 0 else 0.0])
        for i in range(3):
            mlp_arrays(rng, f"{p}.gate{i}", mlp_dims(widths[i + 1], h, widths[i + 1]), arrays, final_scale=0.01)
    mlp_arrays(rng, "prob.score", mlp_dims(4 * t_out, h, 1), arrays)
    return ModelParams.from_arrays(arrays)


def decode_head_batch(params: ModelParams, head: int, g: Value, config: Config) -> Value:
    """Decode one head: Value (B, A, C, 2) -> Value (B, A, T_out, 2)."""
    B, A = g.shape[0], g.shape[1]
    p = f"decoder.head{head}"
    mean = vmean(g, axis=2, keepdims=True)
    z = sub(g, mean)
    for i in range(4):
        z = matmul(params[f"{p}.mix{i}"], z)
        z = add(z, mul(matmul(z, constant(_ROT90)), params[f"{p}.rot{i}"]))
        if i < 3:
            s = apply_mlp(params, f"{p}.gate{i}", l2norm(z))
            gate = scalar_affine(sigmoid(s), 2.0, 0.0)
            z = mul(z, reshape(gate, (B, A, z.shape[2], 1)))
    return add(z, mean)


def probability_inputs(trajectories: np.ndarray) -> np.ndarray:
    """Canonical-frame per-head features for the probability scorer.

    Input (..., H, T, 2); output (..., H, 4T).  Points are re-expressed in
    a frame anchored at the centroid of all heads and aligned with the mean
    head endpoint, then each head's flattened coordinates are paired with
    the cross-head mean so the scorer sees symmetric context.  The frame is
    built from the trajectories themselves, so the features (and therefore
    the probabilities) are invariant under SE(2) maps of the scene.
    """
    H, T = trajectories.shape[-3], trajectories.shape[-2]
    center = trajectories.mean(axis=(-3, -2), keepdims=True)
    endpoint = trajectories[..., -1, :].mean(axis=-2, keepdims=True)[..., None, :]
    axis = endpoint - center
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    u = axis / np.maximum(norm, _CANON_EPS)
    perp = np.stack([-u[..., 1], u[..., 0]], axis=-1)
    rel = trajectories - center
    canon = np.stack(
        [np.sum(rel * u, axis=-1), np.sum(rel * perp, axis=-1)], axis=-1
    )
    flat = canon.reshape(*canon.shape[:-3], H, 2 * T)
    context = np.broadcast_to(flat.mean(axis=-2, keepdims=True), flat.shape)
    return np.concatenate([flat, context], axis=-1)


def estimate_probabilities_batch(
    params: ModelParams, trajectories: np.ndarray, config: Config
) -> Value:
    """Head probabilities from decoded trajectories: Value (B, A, H).

    Trajectories arrive as a plain array (already detached); gradients flow
    only into the scorer parameters.
    """
    feats = probability_inputs(trajectories)
    logits = apply_mlp(params, "prob.score", constant(feats))
    B, A, H = trajectories.shape[0], trajectories.shape[1], trajectories.shape[2]
    return softmax(reshape(logits, (B, A, H)))


def forecast_batch(
    params: ModelParams,
    histories: np.ndarray,
    agent_mask: np.ndarray,
    maps: np.ndarray,
    lane_mask: np.ndarray,
    config: Config,
    prob_inputs_override: np.ndarray | None = None,
) -> tuple[Value, Value, dict]:
    """Full forward pass over a batch of scene arrays.

    Returns trajectory Value (B, A, H, T_out, 2), probability Value
    (B, A, H) and an aux dict.  ``prob_inputs_override`` pins the scorer's
    detached inputs, which finite-difference checks use to hold the
    stop-gradient boundary fixed while parameters are perturbed.
    """
    g, h, aux = run_backbone_batch(params, histories, agent_mask, maps, lane_mask, config)
    B, A = histories.shape[0], histories.shape[1]
    heads = []
    for head in range(config.num_heads):
        traj = decode_head_batch(params, head, g, config)
        heads.append(reshape(traj, (B, A, 1, config.t_out, 2)))
    trajectories = concat(heads, axis=2)
    if prob_inputs_override is None:
        feats = probability_inputs(trajectories.data)
    else:
        feats = prob_inputs_override
    logits = apply_mlp(params, "prob.score", constant(feats))
    probabilities = softmax(reshape(logits, (B, A, config.num_heads)))
    aux = dict(aux)
    aux["prob_inputs"] = feats
    return trajectories, probabilities, aux


def forecast(scene: Scene, params: ModelParams, config: Config) -> ForecastSet:
    """Forecast a single validated scene."""
    violations = validate_scene(scene, config)
    if violations:
        raise SceneValidationError(violations)
    traj, prob, _ = forecast_batch(
        params,
        scene.histories[None],
        scene.agent_mask[None],
        scene.map_polylines[None],
        scene.lane_mask[None],
        config,
    )
    trajectories = traj.data[0] * scene.agent_mask[:, None, None, None]
    return ForecastSet(trajectories=trajectories, probabilities=prob.data[0])


def select_trajectory(forecast_set: ForecastSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Most probable head per agent (ties to the lowest index).

    Returns (indices (A,), trajectories (A, T_out, 2), probabilities (A,)).
    """
    probs = forecast_set.probabilities
    indices = np.argmax(probs, axis=-1)
    rows = np.arange(probs.shape[0])
    return (
        indices,
        forecast_set.trajectories[rows, indices],
        probs[rows, indices],
    )
