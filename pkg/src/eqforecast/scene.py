"""Scene, forecast and ground-truth types plus planar rigid-motion actions.

Agents and lanes that do not exist in a scene are padded: their mask entry
is false and every padded coordinate row is exactly zero.  Masks are stored
explicitly rather than inferred from zeros, because a real agent may sit at
the origin.  All types are immutable after construction (arrays are marked
read-only), so instances are freely shareable.

Agent 0 is the ego/focal agent by convention throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config


class SceneValidationError(ValueError):
    """A scene or forecast failed validation; ``violations`` lists why."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def _freeze(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Scene:
    """Model input: agent histories and map polylines, both mask-padded.

    histories: (A, T_in, 2) metres; agent_mask: (A,) bool;
    map_polylines: (L, K, 2) metres; lane_mask: (L,) bool.
    """

    histories: np.ndarray
    agent_mask: np.ndarray
    map_polylines: np.ndarray
    lane_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "histories", _freeze(self.histories))
        object.__setattr__(self, "agent_mask", _freeze(self.agent_mask, dtype=bool))
        object.__setattr__(self, "map_polylines", _freeze(self.map_polylines))
        object.__setattr__(self, "lane_mask", _freeze(self.lane_mask, dtype=bool))


@dataclass(frozen=True)
class GroundTruth:
    """Observed futures: (A, T_out, 2) metres with the scene's agent mask."""

    futures: np.ndarray
    agent_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "futures", _freeze(self.futures))
        object.__setattr__(self, "agent_mask", _freeze(self.agent_mask, dtype=bool))


@dataclass(frozen=True)
class ForecastSet:
    """Multi-modal prediction: trajectories (A, H, T_out, 2) and per-agent
    head probabilities (A, H) summing to one."""

    trajectories: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "trajectories", _freeze(self.trajectories))
        object.__setattr__(self, "probabilities", _freeze(self.probabilities))

    @property
    def num_heads(self) -> int:
        return self.trajectories.shape[1]


@dataclass(frozen=True)
class Se2Transform:
    """A planar rigid motion x -> R x + t (rotation plus translation)."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (2, 2):
            raise ValueError(f"rotation must be 2x2, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(2), atol=1e-12):
            raise ValueError("rotation is not orthogonal within 1e-12")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has determinant -1 (reflections are not rigid motions)")
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(np.asarray(self.translation).reshape(2)))

    @classmethod
    def identity(cls) -> "Se2Transform":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, translation=(0.0, 0.0)) -> "Se2Transform":
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=np.float64))

    @classmethod
    def random(cls, rng: np.random.Generator, translation_scale: float = 50.0) -> "Se2Transform":
        theta = rng.uniform(0.0, 2.0 * np.pi)
        t = rng.uniform(-translation_scale, translation_scale, size=2)
        return cls.from_angle(theta, t)

    def compose(self, other: "Se2Transform") -> "Se2Transform":
        """Return self after other: (self o other)(x) = self(other(x))."""
        return Se2Transform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Transform an (..., 2) array of coordinates."""
        return points @ self.rotation.T + self.translation


# ---------------------------------------------------------------------------
# validation


def _check_padding(name: str, coords: np.ndarray, mask: np.ndarray, out: list[str]) -> None:
    for i in np.flatnonzero(~mask):
        if np.any(coords[i] != 0.0):
            out.append(f"{name} {i}: masked but has nonzero coordinates")


def validate_scene(scene: Scene, config: Config | None = None) -> list[str]:
    """Return every invariant violation (empty list means valid)."""
    v: list[str] = []
    h, m = scene.histories, scene.map_polylines
    if h.ndim != 3 or h.shape[-1] != 2:
        v.append(f"histories: expected (A, T_in, 2), got {h.shape}")
        return v
    if m.ndim != 3 or m.shape[-1] != 2:
        v.append(f"map_polylines: expected (L, K, 2), got {m.shape}")
        return v
    if scene.agent_mask.shape != (h.shape[0],):
        v.append(f"agent_mask: expected ({h.shape[0]},), got {scene.agent_mask.shape}")
    if scene.lane_mask.shape != (m.shape[0],):
        v.append(f"lane_mask: expected ({m.shape[0]},), got {scene.lane_mask.shape}")
    if config is not None:
        want_h = (config.num_agents, config.t_in, 2)
        want_m = (config.num_lanes, config.lane_points, 2)
        if h.shape != want_h:
            v.append(f"histories: shape {h.shape} does not match configured {want_h}")
        if m.shape != want_m:
            v.append(f"map_polylines: shape {m.shape} does not match configured {want_m}")
    if not np.all(np.isfinite(h)):
        v.append("histories: non-finite entries")
    if not np.all(np.isfinite(m)):
        v.append("map_polylines: non-finite entries")
    if v:
        return v
    _check_padding("agent", h, scene.agent_mask, v)
    _check_padding("lane", m, scene.lane_mask, v)
    return v


def validate_ground_truth(gt: GroundTruth, config: Config | None = None) -> list[str]:
    v: list[str] = []
    f = gt.futures
    if f.ndim != 3 or f.shape[-1] != 2:
        return [f"futures: expected (A, T_out, 2), got {f.shape}"]
    if gt.agent_mask.shape != (f.shape[0],):
        v.append(f"agent_mask: expected ({f.shape[0]},), got {gt.agent_mask.shape}")
        return v
    if config is not None and f.shape != (config.num_agents, config.t_out, 2):
        v.append(f"futures: shape {f.shape} does not match configuration")
    if not np.all(np.isfinite(f)):
        v.append("futures: non-finite entries")
    if v:
        return v
    _check_padding("agent", f, gt.agent_mask, v)
    return v


def validate_forecast(fs: ForecastSet, config: Config | None = None) -> list[str]:
    v: list[str] = []
    t, p = fs.trajectories, fs.probabilities
    if t.ndim != 4 or t.shape[-1] != 2:
        return [f"trajectories: expected (A, H, T_out, 2), got {t.shape}"]
    if p.shape != t.shape[:2]:
        return [f"probabilities: expected {t.shape[:2]}, got {p.shape}"]
    if config is not None:
        want = (config.num_agents, config.num_heads, config.t_out, 2)
        if t.shape != want:
            v.append(f"trajectories: shape {t.shape} does not match configured {want}")
    if not np.all(np.isfinite(t)):
        v.append("trajectories: non-finite entries")
    for a in range(p.shape[0]):
        row = p[a]
        if np.any(row < 0.0) or np.any(row > 1.0):
            v.append(f"agent {a}: probability outside [0, 1]")
        if abs(row.sum() - 1.0) > 1e-6:
            v.append(f"agent {a}: probabilities sum to {row.sum():.9g}, not 1")
    return v


# ---------------------------------------------------------------------------
# group actions (mask-aware: padded rows stay exactly zero)


def _masked_apply(g: Se2Transform, coords: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(coords)
    out[mask] = g.apply_points(coords[mask])
    return out


def apply_se2(scene: Scene, g: Se2Transform) -> Scene:
    """Rigidly move every valid coordinate; masks and padding are preserved."""
    return Scene(
        histories=_masked_apply(g, scene.histories, scene.agent_mask),
        agent_mask=scene.agent_mask,
        map_polylines=_masked_apply(g, scene.map_polylines, scene.lane_mask),
        lane_mask=scene.lane_mask,
    )


def apply_se2_ground_truth(gt: GroundTruth, g: Se2Transform) -> GroundTruth:
    return GroundTruth(
        futures=_masked_apply(g, gt.futures, gt.agent_mask),
        agent_mask=gt.agent_mask,
    )


def apply_se2_forecast(fs: ForecastSet, g: Se2Transform, agent_mask: np.ndarray) -> ForecastSet:
    """Transform trajectories of valid agents; probabilities are untouched."""
    return ForecastSet(
        trajectories=_masked_apply(g, fs.trajectories, np.asarray(agent_mask, dtype=bool)),
        probabilities=fs.probabilities,
    )


# ---------------------------------------------------------------------------
# baseline


def constant_velocity_forecast(scene: Scene, t_out: int) -> ForecastSet:
    """Single-head linear extrapolation from the last two history points.

    Exactly equivariant by construction; masked agents yield zero rows.
    An agent whose history is shorter than two points would hold position,
    which for zero-padded masked rows degenerates to staying at the origin.
    """
    a, t_in, _ = scene.histories.shape
    if t_in < 2:
        raise ValueError(f"constant-velocity baseline needs T_in >= 2, got {t_in}")
    traj = np.zeros((a, 1, t_out, 2))
    last = scene.histories[:, -1]
    vel = last - scene.histories[:, -2]
    steps = np.arange(1, t_out + 1).reshape(1, t_out, 1)
    extrapolated = last[:, None, :] + steps * vel[:, None, :]
    traj[scene.agent_mask, 0] = extrapolated[scene.agent_mask]
    return ForecastSet(trajectories=traj, probabilities=np.ones((a, 1)))
