"""Decoder heads, probability estimation and trajectory selection."""

import numpy as np
import pytest

from conftest import manual_scene, small_config
from eqforecast.autodiff import backward, vsum, log, clamp_min, vslice
from eqforecast.predictor import (
    build_params,
    decode_head_batch,
    estimate_probabilities_batch,
    forecast,
    forecast_batch,
    probability_inputs,
    select_trajectory,
)
from eqforecast.backbone import run_backbone_batch
from eqforecast.scene import ForecastSet, Se2Transform, apply_se2, validate_forecast
from eqforecast.scene import SceneValidationError


def test_constant_channels_decode_to_that_point():
    cfg = small_config()
    params = build_params(cfg)
    point = np.array([3.5, -2.0])
    from eqforecast.autodiff import constant

    g = constant(np.tile(point, (1, cfg.num_agents, cfg.geom_channels, 1)))
    out = decode_head_batch(params, 0, g, cfg)
    # centred input is zero, so any head reproduces the common point
    assert np.allclose(out.data, point, atol=1e-12)
    assert out.shape == (1, cfg.num_agents, cfg.t_out, 2)


def test_forecast_set_validates():
    cfg = small_config()
    scene = manual_scene(cfg)
    fs = forecast(scene, build_params(cfg), cfg)
    assert validate_forecast(fs, cfg) == []


def test_forecast_rejects_invalid_scene():
    cfg = small_config()
    scene = manual_scene(cfg)
    bad_mask = scene.agent_mask.copy()
    bad_mask[0] = False  # nonzero history now violates padding
    from eqforecast.scene import Scene

    bad = Scene(scene.histories, bad_mask, scene.map_polylines, scene.lane_mask)
    with pytest.raises(SceneValidationError):
        forecast(bad, build_params(cfg), cfg)


def test_identical_heads_give_uniform_probabilities():
    cfg = small_config(num_heads=3)
    params = build_params(cfg)
    # overwrite every head with head 0's arrays
    for h in (1, 2):
        for name in params.subset_names(f"decoder.head{h}"):
            src = name.replace(f"head{h}", "head0")
            params[name].data[:] = params[src].data
    scene = manual_scene(cfg)
    fs = forecast(scene, params, cfg)
    assert np.allclose(fs.trajectories[:, 0], fs.trajectories[:, 1], atol=1e-12)
    assert np.allclose(fs.probabilities, 1.0 / 3.0, atol=1e-12)


def test_probabilities_sum_to_one():
    cfg = small_config()
    scene = manual_scene(cfg)
    fs = forecast(scene, build_params(cfg), cfg)
    assert np.allclose(fs.probabilities.sum(axis=-1), 1.0, atol=1e-9)


def test_probability_features_rigid_motion_invariant(rng):
    traj = rng.normal(0.0, 5.0, size=(2, 3, 4, 7, 2))
    base = probability_inputs(traj)
    g = Se2Transform.random(rng)
    moved = probability_inputs(traj @ g.rotation.T + g.translation)
    assert np.max(np.abs(moved - base)) < 1e-9


def test_select_trajectory_examples():
    traj = np.zeros((1, 3, 4, 2))
    fs = ForecastSet(traj, np.array([[0.1, 0.7, 0.2]]))
    idx, picked, probs = select_trajectory(fs)
    assert idx[0] == 1
    assert probs[0] == pytest.approx(0.7)
    uniform = ForecastSet(traj, np.full((1, 3), 1 / 3))
    idx, _, _ = select_trajectory(uniform)
    assert idx[0] == 0  # tie broken to the lowest index


def test_pipeline_equivariance_map_mode_none(rng):
    cfg = small_config(map_mode="none")
    scene = manual_scene(cfg)
    params = build_params(cfg)
    base = forecast(scene, params, cfg)
    for _ in range(3):
        g = Se2Transform.random(rng)
        moved = forecast(apply_se2(scene, g), params, cfg)
        expect = base.trajectories @ g.rotation.T + g.translation
        rel = np.max(np.abs(moved.trajectories - expect)) / (np.max(np.abs(expect)) + 1e-8)
        assert rel < 1e-6
        assert np.max(np.abs(moved.probabilities - base.probabilities)) < 1e-6
        sel_base, _, _ = select_trajectory(base)
        sel_moved, _, _ = select_trajectory(moved)
        assert np.array_equal(sel_base, sel_moved)


def test_head_count_follows_config():
    cfg = small_config(num_heads=6)
    scene = manual_scene(cfg)
    fs = forecast(scene, build_params(cfg), cfg)
    assert fs.trajectories.shape[1] == 6
    assert fs.num_heads == 6


def test_parameter_groups_reported():
    cfg = small_config()
    groups = build_params(cfg).count_by_group()
    assert set(groups) == {"map", "backbone", "decoder", "prob"}
    assert all(v > 0 for v in groups.values())


def test_probability_gradient_stops_at_detach():
    cfg = small_config()
    scene = manual_scene(cfg)
    params = build_params(cfg)
    traj, prob, _ = forecast_batch(
        params,
        scene.histories[None],
        scene.agent_mask[None],
        scene.map_polylines[None],
        scene.lane_mask[None],
        cfg,
    )
    # cross-entropy against head 0 for every agent
    loss = vsum(log(clamp_min(vslice(prob, (slice(None), slice(None), 0)), 1e-12))) * -1.0
    grads = backward(loss, params.leaves())
    for name, leaf in zip(params.names(), params.leaves()):
        g = grads[leaf]
        if name.startswith("prob."):
            continue
        assert np.all(g == 0.0), f"gradient leaked into {name}"
    prob_norms = [np.abs(grads[params[n]]).sum() for n in params.subset_names("prob.")]
    assert sum(prob_norms) > 0.0


def test_masked_agent_rows_zeroed_in_forecast():
    cfg = small_config()
    scene = manual_scene(cfg, masked_agents=1)
    fs = forecast(scene, build_params(cfg), cfg)
    assert np.all(fs.trajectories[-1] == 0.0)
