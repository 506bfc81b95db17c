"""Scene domain types, SE(2) actions and the constant-velocity baseline."""

import numpy as np
import pytest

from conftest import manual_scene, small_config
from eqforecast.scene import (
    ForecastSet,
    GroundTruth,
    Scene,
    Se2Transform,
    apply_se2,
    apply_se2_ground_truth,
    constant_velocity_forecast,
    validate_forecast,
    validate_ground_truth,
    validate_scene,
)


def test_valid_scene_passes():
    cfg = small_config()
    scene = manual_scene(cfg)
    assert validate_scene(scene, cfg) == []


def test_masked_agent_with_nonzero_coordinates_flagged():
    cfg = small_config()
    scene = manual_scene(cfg)
    mask = scene.agent_mask.copy()
    mask[1] = False
    bad = Scene(scene.histories, mask, scene.map_polylines, scene.lane_mask)
    violations = validate_scene(bad, cfg)
    assert len(violations) == 1
    assert "agent 1" in violations[0]


def test_probability_row_not_summing_to_one_flagged():
    cfg = small_config()
    A, H, T = cfg.num_agents, cfg.num_heads, cfg.t_out
    probs = np.full((A, H), 1.0 / H)
    probs[0] = [0.5, 0.3]  # sums to 0.8
    fs = ForecastSet(np.zeros((A, H, T, 2)), probs)
    violations = validate_forecast(fs, cfg)
    assert any("agent 0" in v and "0.8" in v for v in violations)


def test_ground_truth_padding_rule():
    cfg = small_config()
    fut = np.ones((cfg.num_agents, cfg.t_out, 2))
    mask = np.array([True] * (cfg.num_agents - 1) + [False])
    assert validate_ground_truth(GroundTruth(fut.copy(), mask), cfg) != []
    fut[-1] = 0.0
    assert validate_ground_truth(GroundTruth(fut, mask), cfg) == []


def test_se2_rejects_non_rotations():
    with pytest.raises(ValueError):
        Se2Transform(np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        # orthogonal but a reflection
        Se2Transform(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_identity_transform_is_noop():
    cfg = small_config()
    scene = manual_scene(cfg, masked_agents=1)
    out = apply_se2(scene, Se2Transform.identity())
    assert np.array_equal(out.histories, scene.histories)
    assert np.array_equal(out.map_polylines, scene.map_polylines)


def test_quarter_turn_and_translation():
    quarter = Se2Transform.from_angle(np.pi / 2)
    assert np.allclose(quarter.apply_points(np.array([1.0, 0.0])), [0.0, 1.0], atol=1e-15)
    shift = Se2Transform(np.eye(2), np.array([5.0, -2.0]))
    assert np.allclose(shift.apply_points(np.array([1.0, 1.0])), [6.0, -1.0], atol=1e-15)


def test_masked_rows_stay_zero_under_transform():
    cfg = small_config()
    scene = manual_scene(cfg, masked_agents=1)
    g = Se2Transform.from_angle(1.2, (100.0, -50.0))
    out = apply_se2(scene, g)
    assert np.all(out.histories[-1] == 0.0)


def test_transforms_compose(rng):
    cfg = small_config()
    scene = manual_scene(cfg)
    g1 = Se2Transform.random(rng)
    g2 = Se2Transform.random(rng)
    once = apply_se2(apply_se2(scene, g1), g2)
    combined = apply_se2(scene, g2.compose(g1))
    assert np.allclose(once.histories, combined.histories, atol=1e-12)
    assert np.allclose(once.map_polylines, combined.map_polylines, atol=1e-12)


def test_constant_velocity_extrapolation():
    cfg = small_config(num_agents=1, t_in=2, num_lanes=1, lane_points=2)
    scene = Scene(
        histories=np.array([[[0.0, 0.0], [1.0, 0.0]]]),
        agent_mask=np.ones(1),
        map_polylines=np.zeros((1, 2, 2)),
        lane_mask=np.zeros(1),
    )
    fs = constant_velocity_forecast(scene, 3)
    assert np.allclose(fs.trajectories[0, 0], [[2, 0], [3, 0], [4, 0]], atol=1e-15)
    assert fs.probabilities[0, 0] == 1.0


def test_constant_velocity_stationary():
    scene = Scene(
        histories=np.full((1, 4, 2), 7.0),
        agent_mask=np.ones(1),
        map_polylines=np.zeros((1, 2, 2)),
        lane_mask=np.zeros(1),
    )
    fs = constant_velocity_forecast(scene, 5)
    assert np.allclose(fs.trajectories[0, 0], 7.0, atol=1e-15)


def test_constant_velocity_needs_two_points():
    scene = Scene(
        histories=np.zeros((1, 1, 2)),
        agent_mask=np.ones(1),
        map_polylines=np.zeros((1, 2, 2)),
        lane_mask=np.zeros(1),
    )
    with pytest.raises(ValueError):
        constant_velocity_forecast(scene, 3)


def test_constant_velocity_equivariant_exactly(rng):
    cfg = small_config()
    scene = manual_scene(cfg, masked_agents=1)
    g = Se2Transform.random(rng)
    direct = constant_velocity_forecast(apply_se2(scene, g), cfg.t_out)
    moved = constant_velocity_forecast(scene, cfg.t_out)
    expect = np.zeros_like(moved.trajectories)
    valid = scene.agent_mask
    expect[valid] = moved.trajectories[valid] @ g.rotation.T + g.translation
    assert np.allclose(direct.trajectories, expect, atol=1e-9)


def test_apply_se2_ground_truth_matches_manual(rng):
    cfg = small_config()
    scene = manual_scene(cfg)
    truth = GroundTruth(
        futures=rng.normal(size=(cfg.num_agents, cfg.t_out, 2)),
        agent_mask=scene.agent_mask,
    )
    g = Se2Transform.random(rng)
    out = apply_se2_ground_truth(truth, g)
    assert np.allclose(out.futures, truth.futures @ g.rotation.T + g.translation, atol=1e-12)
