"""Synthetic scene generation from parametric driving scenarios.

Agents follow constant-speed straight lines or circular arcs.  A ``fork``
scenario gives every agent a straight history and then branches its future
onto one of ``mode_count`` curvature-separated paths, which creates the
multi-modal ground truth used by the training sanity checks.  Lanes are
laid along the ideal (noise-free) paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import GroundTruth, Scene

KINDS = ("straight", "left-turn", "right-turn", "fork")


@dataclass(frozen=True)
class ScenarioSpec:
    """Parametric family of scenes.

    ``turn_radius`` controls arc curvature for the turning kinds and the
    branch curvatures of a fork; ``noise_sigma`` is the standard deviation
    of i.i.d. Gaussian jitter added to every observed coordinate.
    """

    kind: str = "straight"
    speed: float = 10.0
    turn_radius: float = 20.0
    mode_count: int = 1
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.speed <= 0.0:
            raise ValueError("speed must be positive")
        if self.turn_radius <= 0.0:
            raise ValueError("turn radius must be positive")
        if self.mode_count < 1:
            raise ValueError("mode count must be at least 1")
        if self.noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")


def fork_curvatures(spec: ScenarioSpec) -> list[float]:
    """Deterministic branch curvatures for a fork scenario.

    Even counts use mirrored arc pairs only, so every branch is
    geometrically distinct from its siblings; odd counts add the straight
    branch.  Pairs tighten as +-1/r, -+1/(2r), ...
    """
    modes: list[float] = [0.0] if spec.mode_count % 2 else []
    level = 1
    while len(modes) < spec.mode_count:
        k = 1.0 / (level * spec.turn_radius)
        modes.extend([k, -k])
        level += 1
    return modes[: spec.mode_count]


def _path_points(
    start: np.ndarray, heading: float, speed: float, curvature: float, times: np.ndarray
) -> np.ndarray:
    """Positions along a constant-speed path of fixed curvature.

    Positive curvature turns left.  At curvature zero the path is the
    straight line start + v * t.
    """
    direction = np.array([np.cos(heading), np.sin(heading)])
    if curvature == 0.0:
        return start[None, :] + speed * times[:, None] * direction[None, :]
    radius = 1.0 / curvature
    normal = np.array([-np.sin(heading), np.cos(heading)])
    center = start + radius * normal
    angles = curvature * speed * times
    offset = start - center
    cos_a, sin_a = np.cos(angles), np.sin(angles)
    rotated = np.stack(
        [
            cos_a * offset[0] - sin_a * offset[1],
            sin_a * offset[0] + cos_a * offset[1],
        ],
        axis=-1,
    )
    return center[None, :] + rotated


def _agent_paths(spec: ScenarioSpec) -> list[float]:
    """Curvature options for one agent's future."""
    if spec.kind == "straight":
        return [0.0]
    if spec.kind == "left-turn":
        return [1.0 / spec.turn_radius]
    if spec.kind == "right-turn":
        return [-1.0 / spec.turn_radius]
    return fork_curvatures(spec)


def generate_scenes(
    spec: ScenarioSpec,
    count: int,
    seed: int,
    num_agents: int = 4,
    t_in: int = 20,
    t_out: int = 30,
    num_lanes: int = 10,
    lane_points: int = 100,
    rate_hz: float = 10.0,
) -> list[tuple[Scene, GroundTruth]]:
    """Sample ``count`` scenes; identical arguments give identical output."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    dt = 1.0 / rate_hz
    hist_times = (np.arange(t_in) - (t_in - 1)) * dt
    future_times = (np.arange(t_out) + 1) * dt
    lane_times = np.linspace(hist_times[0], future_times[-1], lane_points)
    out = []
    for _ in range(count):
        origin = rng.uniform(-30.0, 30.0, size=2)
        heading = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(heading), np.sin(heading)])
        normal = np.array([-np.sin(heading), np.cos(heading)])
        histories = np.zeros((num_agents, t_in, 2))
        futures = np.zeros((num_agents, t_out, 2))
        lane_paths: list[np.ndarray] = []
        options = _agent_paths(spec)
        for i in range(num_agents):
            if i == 0:
                start = origin
            else:
                lateral = 3.5 * ((i + 1) // 2) * (1 if i % 2 else -1)
                start = (
                    origin
                    + lateral * normal
                    + rng.uniform(-10.0, 10.0) * direction
                )
            if spec.kind == "fork":
                histories[i] = _path_points(start, heading, spec.speed, 0.0, hist_times)
                branch = options[rng.integers(len(options))]
                futures[i] = _path_points(start, heading, spec.speed, branch, future_times)
                for k in options:
                    lane_paths.append(_path_points(start, heading, spec.speed, k, lane_times))
            else:
                curvature = options[0]
                histories[i] = _path_points(start, heading, spec.speed, curvature, hist_times)
                futures[i] = _path_points(start, heading, spec.speed, curvature, future_times)
                lane_paths.append(_path_points(start, heading, spec.speed, curvature, lane_times))
        if spec.noise_sigma > 0.0:
            histories = histories + rng.normal(0.0, spec.noise_sigma, histories.shape)
            futures = futures + rng.normal(0.0, spec.noise_sigma, futures.shape)
        maps = np.zeros((num_lanes, lane_points, 2))
        lane_mask = np.zeros(num_lanes)
        for j, lane in enumerate(lane_paths[:num_lanes]):
            maps[j] = lane
            lane_mask[j] = 1.0
        agent_mask = np.ones(num_agents)
        scene = Scene(
            histories=histories,
            agent_mask=agent_mask,
            map_polylines=maps,
            lane_mask=lane_mask,
        )
        truth = GroundTruth(futures=futures, agent_mask=agent_mask.copy())
        out.append((scene, truth))
    return out
