"""Synthetic scenario generation: determinism, geometry, branch balance."""

import numpy as np
import pytest

from eqforecast.generator import ScenarioSpec, fork_curvatures, generate_scenes
from eqforecast.scene import validate_ground_truth, validate_scene


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(kind="zigzag")
    with pytest.raises(ValueError):
        ScenarioSpec(speed=0.0)
    with pytest.raises(ValueError):
        ScenarioSpec(turn_radius=-1.0)
    with pytest.raises(ValueError):
        ScenarioSpec(mode_count=0)
    with pytest.raises(ValueError):
        ScenarioSpec(noise_sigma=-0.1)
    with pytest.raises(ValueError):
        generate_scenes(ScenarioSpec(), 0, seed=0)


def test_fork_curvature_layout():
    r = 20.0
    assert fork_curvatures(ScenarioSpec(kind="fork", mode_count=1, turn_radius=r)) == [0.0]
    assert fork_curvatures(ScenarioSpec(kind="fork", mode_count=2, turn_radius=r)) == [
        1 / r,
        -1 / r,
    ]
    assert fork_curvatures(ScenarioSpec(kind="fork", mode_count=3, turn_radius=r)) == [
        0.0,
        1 / r,
        -1 / r,
    ]
    four = fork_curvatures(ScenarioSpec(kind="fork", mode_count=4, turn_radius=r))
    assert four == [1 / r, -1 / r, 1 / (2 * r), -1 / (2 * r)]


def test_straight_noise_free_spacing():
    spec = ScenarioSpec(kind="straight", speed=10.0, noise_sigma=0.0)
    pairs = generate_scenes(spec, 3, seed=4, rate_hz=10.0)
    for scene, truth in pairs:
        track = np.concatenate([scene.histories, truth.futures], axis=1)
        steps = np.linalg.norm(np.diff(track, axis=1), axis=-1)
        # 10 m/s at 10 Hz puts consecutive samples exactly one metre apart
        assert np.max(np.abs(steps - 1.0)) < 1e-9


def test_same_seed_is_bitwise_identical():
    spec = ScenarioSpec(kind="fork", mode_count=3, noise_sigma=0.3)
    a = generate_scenes(spec, 4, seed=11)
    b = generate_scenes(spec, 4, seed=11)
    for (sa, ta), (sb, tb) in zip(a, b):
        assert np.array_equal(sa.histories, sb.histories)
        assert np.array_equal(sa.map_polylines, sb.map_polylines)
        assert np.array_equal(ta.futures, tb.futures)
    c = generate_scenes(spec, 4, seed=12)
    assert not np.array_equal(a[0][0].histories, c[0][0].histories)


def test_generated_scenes_validate():
    for kind, modes in (("straight", 1), ("left-turn", 1), ("fork", 3)):
        spec = ScenarioSpec(kind=kind, mode_count=modes, noise_sigma=0.2)
        for scene, truth in generate_scenes(spec, 2, seed=5):
            assert validate_scene(scene) == []
            assert validate_ground_truth(truth) == []


def test_turn_stays_on_circle():
    r = 20.0
    spec = ScenarioSpec(kind="left-turn", turn_radius=r, noise_sigma=0.0)
    scene, truth = generate_scenes(spec, 1, seed=2, t_in=6, t_out=6)[0]
    track = np.concatenate([scene.histories[0], truth.futures[0]], axis=0)
    # circumcenter of three samples, then every sample sits at radius r
    a, b, c = track[0], track[4], track[8]
    rows = np.array([2 * (b - a), 2 * (c - a)])
    rhs = np.array([b @ b - a @ a, c @ c - a @ a])
    center = np.linalg.solve(rows, rhs)
    radii = np.linalg.norm(track - center, axis=-1)
    assert np.max(np.abs(radii - r)) < 1e-6


def test_fork_branches_are_balanced():
    spec = ScenarioSpec(kind="fork", mode_count=2, noise_sigma=0.0)
    pairs = generate_scenes(spec, 1000, seed=3, num_agents=1, t_in=4, t_out=10,
                            num_lanes=2, lane_points=5)
    left = 0
    for scene, truth in pairs:
        start = scene.histories[0, -1]
        heading = scene.histories[0, -1] - scene.histories[0, -2]
        swing = truth.futures[0, -1] - start
        if heading[0] * swing[1] - heading[1] * swing[0] > 0:
            left += 1
    assert 450 <= left <= 550
    assert 450 <= 1000 - left <= 550


def test_fork_lanes_cover_all_branches():
    spec = ScenarioSpec(kind="fork", mode_count=3, noise_sigma=0.0)
    scene, truth = generate_scenes(
        spec, 1, seed=6, num_agents=2, num_lanes=6, lane_points=40
    )[0]
    assert scene.lane_mask.sum() == 6  # 2 agents x 3 branches
    # the realised future of each agent coincides with one of its lanes
    for i in range(2):
        endpoint = truth.futures[i, -1]
        gaps = np.linalg.norm(scene.map_polylines - endpoint, axis=-1).min(axis=-1)
        assert gaps.min() < 0.5


def test_history_is_noise_free_straight_under_fork():
    spec = ScenarioSpec(kind="fork", mode_count=3, noise_sigma=0.0)
    scene, _ = generate_scenes(spec, 1, seed=9, t_in=8)[0]
    for hist in scene.histories:
        seg = np.diff(hist, axis=0)
        cross = seg[:-1, 0] * seg[1:, 1] - seg[:-1, 1] * seg[1:, 0]
        assert np.max(np.abs(cross)) < 1e-9
