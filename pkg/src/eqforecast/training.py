"""Mini-batch training: Adam, seeded shuffling, divergence handling.

One trainer owns the parameters.  Per epoch the dataset is shuffled with
the run's generator, batches are stacked into dense arrays, and each step
runs forward -> combined loss -> backward -> Adam.  Epoch log lines are
deterministic for a fixed seed except for the trailing wall-time field,
which exists for humans and is excluded from stability comparisons.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Value, backward
from .checkpoint import Checkpoint, save_checkpoint
from .config import Config
from .layers import ModelParams
from .objective import loss_graph
from .predictor import build_params, forecast_batch
from .scene import GroundTruth, Scene

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """Raised when a batch produces a non-finite loss."""

    def __init__(self, epoch: int, batch_index: int, scene_indices: list[int]):
        self.epoch = epoch
        self.batch_index = batch_index
        self.scene_indices = scene_indices
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index} "
            f"(scene indices {scene_indices})"
        )


# ---------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class BatchArrays:
    histories: np.ndarray
    agent_mask: np.ndarray
    maps: np.ndarray
    lane_mask: np.ndarray
    futures: np.ndarray


def stack_pairs(pairs: list[tuple[Scene, GroundTruth]]) -> BatchArrays:
    if not pairs:
        raise ValueError("cannot stack an empty batch")
    return BatchArrays(
        histories=np.stack([s.histories for s, _ in pairs]),
        agent_mask=np.stack([s.agent_mask for s, _ in pairs]),
        maps=np.stack([s.map_polylines for s, _ in pairs]),
        lane_mask=np.stack([s.lane_mask for s, _ in pairs]),
        futures=np.stack([t.futures for _, t in pairs]),
    )


@dataclass(frozen=True)
class PinnedForward:
    """Frozen stop-gradient inputs for finite-difference probes."""

    prob_inputs: np.ndarray
    best_head: np.ndarray


def batch_loss(
    params: ModelParams,
    batch: BatchArrays,
    config: Config,
    pinned: PinnedForward | None = None,
) -> tuple[Value, dict]:
    """Combined loss over a stacked batch plus a parts dict.

    The parts dict carries the trajectory/probability scalar Values, the
    winning-head indices, and the probability head's detached inputs; the
    latter two pin the forward's non-differentiable choices when re-running
    under parameter perturbations.
    """
    traj, prob, aux = forecast_batch(
        params,
        batch.histories,
        batch.agent_mask,
        batch.maps,
        batch.lane_mask,
        config,
        prob_inputs_override=None if pinned is None else pinned.prob_inputs,
    )
    combined, traj_term, prob_term, best = loss_graph(
        traj,
        prob,
        batch.futures,
        batch.agent_mask,
        config.beta,
        pinned_best=None if pinned is None else pinned.best_head,
    )
    parts = {
        "trajectory": traj_term,
        "probability": prob_term,
        "best_head": best,
        "pinned": PinnedForward(prob_inputs=aux["prob_inputs"], best_head=best),
    }
    return combined, parts


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: "OrderedDict[str, np.ndarray]"
    v: "OrderedDict[str, np.ndarray]"
    step: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "AdamState":
        return cls(
            m=OrderedDict((n, np.zeros_like(p.data)) for n, p in zip(params.names(), params.leaves())),
            v=OrderedDict((n, np.zeros_like(p.data)) for n, p in zip(params.names(), params.leaves())),
        )


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> None:
    """Standard Adam with bias correction, updating parameters in place."""
    state.step += 1
    t = state.step
    for name in params.names():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        params[name].data -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    trajectory: float
    probability: float
    wall_time: float


def format_epoch_line(stats: EpochStats) -> str:
    return (
        f"epoch {stats.epoch} "
        f"loss {stats.loss:.17g} "
        f"traj {stats.trajectory:.17g} "
        f"prob {stats.probability:.17g} "
        f"time {stats.wall_time:.3f}"
    )


def stable_log_fields(line: str) -> str:
    """The seed-deterministic part of an epoch line (wall time dropped)."""
    head, sep, _ = line.rpartition(" time ")
    return head if sep else line


@dataclass
class TrainResult:
    params: ModelParams
    adam: AdamState
    config: Config
    stats: list[EpochStats] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)


def _checkpoint(result: TrainResult) -> Checkpoint:
    return Checkpoint(
        config=result.config,
        params=result.params.arrays(),
        adam_m=result.adam.m,
        adam_v=result.adam.v,
        step=result.adam.step,
    )


def train(
    config: Config,
    pairs: list[tuple[Scene, GroundTruth]],
    out_path=None,
    save_every: int = 0,
    log_fn=None,
) -> TrainResult:
    """Train from scratch on (scene, ground truth) pairs.

    ``out_path`` enables checkpointing (at the end, plus every
    ``save_every`` epochs when positive).  ``log_fn`` receives each epoch
    line as it is produced.  A non-finite loss persists the offending
    batch next to the checkpoint and raises ``TrainingDiverged``.
    """
    if not pairs:
        raise ValueError("training requires a non-empty dataset")
    params = build_params(config)
    state = AdamState.fresh(params)
    result = TrainResult(params=params, adam=state, config=config)
    rng = np.random.default_rng(config.seed)
    order_buffer = np.arange(len(pairs))
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        perm = rng.permutation(order_buffer)
        weighted_loss = weighted_traj = weighted_prob = 0.0
        total_weight = 0.0
        for batch_index, lo in enumerate(range(0, len(pairs), config.batch_size)):
            indices = perm[lo : lo + config.batch_size]
            batch = stack_pairs([pairs[i] for i in indices])
            combined, parts = batch_loss(params, batch, config)
            if not np.isfinite(combined.data):
                _persist_divergence(out_path, epoch, batch_index, indices)
                raise TrainingDiverged(epoch, batch_index, [int(i) for i in indices])
            grad_map = backward(combined, params.leaves())
            grads = {
                name: grad_map[leaf]
                for name, leaf in zip(params.names(), params.leaves())
            }
            adam_step(params, grads, state, config.learning_rate)
            weight = float(batch.agent_mask.sum())
            weighted_loss += float(combined.data) * weight
            weighted_traj += float(parts["trajectory"].data) * weight
            weighted_prob += float(parts["probability"].data) * weight
            total_weight += weight
        stats = EpochStats(
            epoch=epoch,
            loss=weighted_loss / total_weight,
            trajectory=weighted_traj / total_weight,
            probability=weighted_prob / total_weight,
            wall_time=time.perf_counter() - started,
        )
        line = format_epoch_line(stats)
        result.stats.append(stats)
        result.log_lines.append(line)
        if log_fn is not None:
            log_fn(line)
        if out_path is not None and save_every > 0 and epoch % save_every == 0:
            save_checkpoint(_checkpoint(result), out_path)
    if out_path is not None:
        save_checkpoint(_checkpoint(result), out_path)
    return result


def _persist_divergence(out_path, epoch: int, batch_index: int, indices) -> None:
    if out_path is None:
        return
    target = Path(str(out_path) + ".diverged.txt")
    target.write_text(
        f"epoch {epoch}\nbatch {batch_index}\n"
        "scene_indices " + " ".join(str(int(i)) for i in indices) + "\n"
    )
