"""Model evaluation against the constant-velocity baseline.

Produces one MetricReport per horizon for the model and for the baseline,
renderable as a flat key-value text block.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import Config
from .layers import ModelParams
from .objective import MetricReport, evaluate_metrics
from .predictor import forecast_batch
from .scene import ForecastSet, GroundTruth, Scene, constant_velocity_forecast
from .training import stack_pairs


def forecast_many(
    params: ModelParams,
    pairs: list[tuple[Scene, GroundTruth]],
    config: Config,
    batch_size: int = 64,
) -> list[ForecastSet]:
    """Run the model over scenes in stacked batches."""
    out: list[ForecastSet] = []
    for lo in range(0, len(pairs), batch_size):
        chunk = pairs[lo : lo + batch_size]
        batch = stack_pairs(chunk)
        traj, prob, _ = forecast_batch(
            params, batch.histories, batch.agent_mask, batch.maps, batch.lane_mask, config
        )
        cleaned = traj.data * batch.agent_mask[:, :, None, None, None]
        for i in range(len(chunk)):
            out.append(
                ForecastSet(trajectories=cleaned[i], probabilities=prob.data[i])
            )
    return out


@dataclass(frozen=True)
class EvalReport:
    scenes: int
    model: dict[int, MetricReport]
    baseline: dict[int, MetricReport]

    def to_text(self) -> str:
        lines = [f"scenes {self.scenes}"]
        for label, table in (("model", self.model), ("baseline", self.baseline)):
            for tau in sorted(table):
                r = table[tau]
                lines.append(f"{label}.tau{tau}.min_ade {r.min_ade:.17g}")
                lines.append(f"{label}.tau{tau}.min_fde {r.min_fde:.17g}")
                lines.append(f"{label}.tau{tau}.ade {r.selected_ade:.17g}")
                lines.append(f"{label}.tau{tau}.fde {r.selected_fde:.17g}")
                lines.append(f"{label}.tau{tau}.miss_rate {r.miss_rate:.17g}")
        return "\n".join(lines) + "\n"


def evaluate(
    params: ModelParams,
    config: Config,
    pairs: list[tuple[Scene, GroundTruth]],
    taus: tuple[int, ...] = (10, 20, 30),
    miss_threshold: float | None = None,
    batch_size: int = 64,
) -> EvalReport:
    """Metrics for the model and the constant-velocity baseline per horizon."""
    if not pairs:
        raise ValueError("evaluation requires a non-empty dataset")
    threshold = config.miss_threshold if miss_threshold is None else miss_threshold
    t_out = pairs[0][1].futures.shape[1]
    for tau in taus:
        if not 1 <= tau <= t_out:
            raise ValueError(f"horizon {tau} outside [1, {t_out}]")
    model_sets = forecast_many(params, pairs, config, batch_size=batch_size)
    baseline_sets = [constant_velocity_forecast(s, t_out) for s, _ in pairs]
    truths = [t for _, t in pairs]
    model = {
        tau: evaluate_metrics(model_sets, truths, tau, threshold) for tau in taus
    }
    baseline = {
        tau: evaluate_metrics(baseline_sets, truths, tau, threshold) for tau in taus
    }
    return EvalReport(scenes=len(pairs), model=model, baseline=baseline)
