"""Training objective and forecasting metrics.

The combined loss is beta times the winner-take-all trajectory term (mean
displacement error of the best head) plus (1 - beta) times the cross
entropy between the head distribution and the best-head index.  Head
selection uses argmin with ties to the lowest index and is treated as a
constant during differentiation, as is the probability head's view of the
trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Value,
    add,
    clamp_min,
    constant,
    l2norm,
    log,
    mul,
    reshape,
    scalar_affine,
    sub,
    take_along,
    vmean,
    vsum,
)
from .scene import ForecastSet, GroundTruth

PROB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# loss


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss terms plus the per-agent winning head (-1 when masked)."""

    trajectory: float
    probability: float
    combined: float
    best_head: np.ndarray


def displacement_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-step distances between predictions and truth: (..., H, T)."""
    return np.linalg.norm(pred - truth[..., None, :, :], axis=-1)


def head_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Average displacement error per head: (..., H)."""
    return displacement_errors(pred, truth).mean(axis=-1)


def best_head_indices(errors: np.ndarray, agent_mask: np.ndarray) -> np.ndarray:
    """Argmin over heads with ties to the lowest index; -1 for masked rows."""
    idx = np.argmin(errors, axis=-1)
    return np.where(agent_mask > 0.0, idx, -1).astype(np.int64)


def loss_graph(
    trajectories: Value,
    probabilities: Value,
    futures: np.ndarray,
    agent_mask: np.ndarray,
    beta: float,
    pinned_best: np.ndarray | None = None,
) -> tuple[Value, Value, Value, np.ndarray]:
    """Differentiable combined loss over a batch.

    Arguments are the forward pass outputs (B, A, H, T, 2) and (B, A, H)
    plus ground-truth futures (B, A, T, 2).  Returns (combined, trajectory,
    probability) scalar Values and the winning-head array.  ``pinned_best``
    fixes the head selection, which finite-difference probes use so the
    perturbed function matches the one differentiated at the base point.
    """
    n_valid = float(agent_mask.sum())
    if n_valid <= 0.0:
        raise ValueError("loss requires at least one valid agent")
    diff = sub(trajectories, constant(futures[:, :, None]))
    errors = vmean(l2norm(diff), axis=3)
    if pinned_best is None:
        best = best_head_indices(errors.data, agent_mask)
    else:
        best = pinned_best
    gather = np.maximum(best, 0)[..., None]
    picked_err = reshape(take_along(errors, gather, axis=2), agent_mask.shape)
    picked_prob = reshape(take_along(probabilities, gather, axis=2), agent_mask.shape)
    nll = scalar_affine(log(clamp_min(picked_prob, PROB_FLOOR)), -1.0, 0.0)
    weights = constant(agent_mask / n_valid)
    traj_term = vsum(mul(picked_err, weights))
    prob_term = vsum(mul(nll, weights))
    combined = add(
        scalar_affine(traj_term, beta, 0.0), scalar_affine(prob_term, 1.0 - beta, 0.0)
    )
    return combined, traj_term, prob_term, best


def combined_loss(
    forecast_set: ForecastSet, truth: GroundTruth, beta: float
) -> LossBreakdown:
    """Loss terms for one scene, computed without building a graph."""
    errors = head_errors(forecast_set.trajectories, truth.futures)
    best = best_head_indices(errors, truth.agent_mask)
    n_valid = float(truth.agent_mask.sum())
    if n_valid <= 0.0:
        raise ValueError("loss requires at least one valid agent")
    rows = np.arange(errors.shape[0])
    gather = np.maximum(best, 0)
    picked_err = errors[rows, gather]
    picked_prob = forecast_set.probabilities[rows, gather]
    nll = -np.log(np.maximum(picked_prob, PROB_FLOOR))
    traj = float(np.sum(picked_err * truth.agent_mask) / n_valid)
    prob = float(np.sum(nll * truth.agent_mask) / n_valid)
    combined = beta * traj + (1.0 - beta) * prob
    return LossBreakdown(trajectory=traj, probability=prob, combined=combined, best_head=best)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricReport:
    """Forecast quality at one horizon, averaged over valid agents."""

    horizon: int
    num_agents: int
    min_ade: float
    min_fde: float
    selected_ade: float
    selected_fde: float
    miss_rate: float
    miss_threshold: float

    def to_text(self) -> str:
        lines = [
            f"horizon {self.horizon}",
            f"num_agents {self.num_agents}",
            f"min_ade {self.min_ade:.17g}",
            f"min_fde {self.min_fde:.17g}",
            f"selected_ade {self.selected_ade:.17g}",
            f"selected_fde {self.selected_fde:.17g}",
            f"miss_rate {self.miss_rate:.17g}",
            f"miss_threshold {self.miss_threshold:.17g}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricReport":
        fields: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, raw = line.partition(" ")
            fields[key] = raw
        return cls(
            horizon=int(fields["horizon"]),
            num_agents=int(fields["num_agents"]),
            min_ade=float(fields["min_ade"]),
            min_fde=float(fields["min_fde"]),
            selected_ade=float(fields["selected_ade"]),
            selected_fde=float(fields["selected_fde"]),
            miss_rate=float(fields["miss_rate"]),
            miss_threshold=float(fields["miss_threshold"]),
        )


def _as_lists(forecasts, truths):
    if isinstance(forecasts, ForecastSet):
        forecasts = [forecasts]
    if isinstance(truths, GroundTruth):
        truths = [truths]
    if len(forecasts) != len(truths):
        raise ValueError(
            f"got {len(forecasts)} forecasts but {len(truths)} ground truths"
        )
    if not forecasts:
        raise ValueError("metrics require at least one scene")
    return forecasts, truths


def _check_horizon(tau: int, t_out: int) -> None:
    if not 1 <= tau <= t_out:
        raise ValueError(f"horizon {tau} outside [1, {t_out}]")


def _agent_tables(forecasts, truths, tau: int):
    """Flatten scenes into per-valid-agent arrays at horizon tau.

    Returns (step_errors (N, H, tau), probs (N, H)).
    """
    err_rows, prob_rows = [], []
    for fs, gt in zip(forecasts, truths):
        _check_horizon(tau, gt.futures.shape[1])
        if fs.trajectories.shape[-2] != gt.futures.shape[1]:
            raise ValueError(
                f"forecast horizon {fs.trajectories.shape[-2]} does not match "
                f"ground truth {gt.futures.shape[1]}"
            )
        valid = gt.agent_mask > 0.0
        dists = displacement_errors(fs.trajectories, gt.futures)[..., :tau]
        err_rows.append(dists[valid])
        prob_rows.append(fs.probabilities[valid])
    return np.concatenate(err_rows, axis=0), np.concatenate(prob_rows, axis=0)


def min_ade_metric(forecasts, truths, tau: int) -> float:
    """Best-head average displacement error over the first tau steps."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, _ = _agent_tables(forecasts, truths, tau)
    return float(errors.mean(axis=-1).min(axis=-1).mean())


def min_fde_metric(forecasts, truths, tau: int) -> float:
    """Best-head displacement error at step tau."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, _ = _agent_tables(forecasts, truths, tau)
    return float(errors[..., -1].min(axis=-1).mean())


def selected_ade_metric(forecasts, truths, tau: int) -> float:
    """Average displacement error of the most probable head."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, probs = _agent_tables(forecasts, truths, tau)
    pick = np.argmax(probs, axis=-1)
    rows = np.arange(errors.shape[0])
    return float(errors[rows, pick].mean(axis=-1).mean())


def selected_fde_metric(forecasts, truths, tau: int) -> float:
    """Displacement error of the most probable head at step tau."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, probs = _agent_tables(forecasts, truths, tau)
    pick = np.argmax(probs, axis=-1)
    rows = np.arange(errors.shape[0])
    return float(errors[rows, pick, -1].mean())


def miss_rate_metric(forecasts, truths, tau: int, threshold: float) -> float:
    """Fraction of agents whose best-head endpoint misses by > threshold."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, _ = _agent_tables(forecasts, truths, tau)
    return float((errors[..., -1].min(axis=-1) > threshold).mean())


def evaluate_metrics(forecasts, truths, tau: int, miss_threshold: float) -> MetricReport:
    """All metrics at one horizon in a single report."""
    forecasts, truths = _as_lists(forecasts, truths)
    errors, probs = _agent_tables(forecasts, truths, tau)
    pick = np.argmax(probs, axis=-1)
    rows = np.arange(errors.shape[0])
    return MetricReport(
        horizon=tau,
        num_agents=errors.shape[0],
        min_ade=float(errors.mean(axis=-1).min(axis=-1).mean()),
        min_fde=float(errors[..., -1].min(axis=-1).mean()),
        selected_ade=float(errors[rows, pick].mean(axis=-1).mean()),
        selected_fde=float(errors[rows, pick, -1].mean()),
        miss_rate=float((errors[..., -1].min(axis=-1) > miss_threshold).mean()),
        miss_threshold=miss_threshold,
    )
