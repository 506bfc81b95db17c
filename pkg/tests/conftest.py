"""Shared fixtures: small configurations and ready-made scenes."""

import numpy as np
import pytest

from eqforecast.config import Config
from eqforecast.generator import ScenarioSpec, generate_scenes
from eqforecast.scene import GroundTruth, Scene


def small_config(**overrides) -> Config:
    """A fast configuration for unit tests; override fields as needed."""
    base = dict(
        t_in=6,
        t_out=5,
        num_agents=3,
        num_lanes=2,
        lane_points=8,
        num_heads=2,
        num_cycles=2,
        hidden_dim=8,
        map_mode="invariant",
        seed=0,
    )
    base.update(overrides)
    return Config(**base)


def tiny_grad_config(**overrides) -> Config:
    """The reduced configuration used by the gradient-check criterion."""
    base = dict(
        t_in=4,
        t_out=3,
        num_agents=2,
        num_lanes=2,
        lane_points=5,
        num_heads=2,
        num_cycles=2,
        hidden_dim=8,
        map_mode="invariant",
        seed=0,
    )
    base.update(overrides)
    return Config(**base)


def scenes_for(config: Config, count: int, seed: int, kind: str = "fork",
               mode_count: int = 3, noise_sigma: float = 0.2):
    """Generated scene/truth pairs shaped for ``config``."""
    spec = ScenarioSpec(kind=kind, mode_count=mode_count, noise_sigma=noise_sigma)
    return generate_scenes(
        spec,
        count,
        seed,
        num_agents=config.num_agents,
        t_in=config.t_in,
        t_out=config.t_out,
        num_lanes=config.num_lanes,
        lane_points=config.lane_points,
        rate_hz=config.sample_rate_hz,
    )


def manual_scene(config: Config, seed: int = 0, masked_agents: int = 0) -> Scene:
    """A hand-built random valid scene (no kinematic structure)."""
    rng = np.random.default_rng(seed)
    A, T, L, K = config.num_agents, config.t_in, config.num_lanes, config.lane_points
    mask = np.ones(A)
    if masked_agents:
        mask[A - masked_agents:] = 0.0
    hist = rng.normal(0.0, 5.0, size=(A, T, 2)) * mask[:, None, None]
    lane_mask = np.ones(L)
    lanes = rng.normal(0.0, 20.0, size=(L, K, 2))
    return Scene(
        histories=hist,
        agent_mask=mask,
        map_polylines=lanes,
        lane_mask=lane_mask,
    )


def manual_truth(config: Config, scene: Scene, seed: int = 1) -> GroundTruth:
    rng = np.random.default_rng(seed)
    A, T = config.num_agents, config.t_out
    fut = rng.normal(0.0, 5.0, size=(A, T, 2)) * scene.agent_mask[:, None, None]
    return GroundTruth(futures=fut, agent_mask=scene.agent_mask.copy())


@pytest.fixture
def rng():
    return np.random.default_rng(0)
