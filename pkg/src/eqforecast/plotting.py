"""SVG rendering of scenes, forecasts, and evaluation summaries.

Histories and ground truth are solid polylines, predictions are dotted
with point markers, the ego agent (index 0) is drawn in red, and each
prediction head carries its probability as a text label.  Every artist
belonging to agent i gets an SVG group id starting with ``agent-i`` so
the output is structurally checkable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scene import ForecastSet, GroundTruth, Scene

EGO_COLOR = "#d62728"
NEIGHBOR_COLOR = "#1f77b4"
TRUTH_COLOR = "#2ca02c"
LANE_COLOR = "#b0b0b0"


class PlotError(ValueError):
    pass


def render_forecast_figure(
    scene: Scene,
    truth: GroundTruth | None = None,
    forecast: ForecastSet | None = None,
):
    """Build the figure; callers save it with ``save_figure``."""
    if forecast is not None and forecast.trajectories.shape[0] != scene.histories.shape[0]:
        raise PlotError(
            f"forecast has {forecast.trajectories.shape[0]} agents but the "
            f"scene has {scene.histories.shape[0]}"
        )
    if truth is not None and truth.futures.shape[0] != scene.histories.shape[0]:
        raise PlotError(
            f"ground truth has {truth.futures.shape[0]} agents but the "
            f"scene has {scene.histories.shape[0]}"
        )
    fig, ax = plt.subplots(figsize=(8.0, 8.0))
    for j in range(scene.map_polylines.shape[0]):
        if scene.lane_mask[j] <= 0.0:
            continue
        lane = scene.map_polylines[j]
        (line,) = ax.plot(lane[:, 0], lane[:, 1], color=LANE_COLOR, linewidth=0.8, zorder=1)
        line.set_gid(f"lane-{j}")
    for i in range(scene.histories.shape[0]):
        if scene.agent_mask[i] <= 0.0:
            continue
        color = EGO_COLOR if i == 0 else NEIGHBOR_COLOR
        hist = scene.histories[i]
        (line,) = ax.plot(
            hist[:, 0],
            hist[:, 1],
            color=color,
            linewidth=2.0 if i == 0 else 1.4,
            zorder=3,
        )
        line.set_gid(f"agent-{i}")
        ax.plot(hist[-1, 0], hist[-1, 1], marker="o", color=color, markersize=5, zorder=4)
        if truth is not None and truth.agent_mask[i] > 0.0:
            seg = np.concatenate([hist[-1:], truth.futures[i]], axis=0)
            (gt_line,) = ax.plot(
                seg[:, 0], seg[:, 1], color=TRUTH_COLOR, linewidth=1.6, zorder=2
            )
            gt_line.set_gid(f"agent-{i}-truth")
        if forecast is None:
            continue
        for h in range(forecast.num_heads):
            pred = forecast.trajectories[i, h]
            seg = np.concatenate([hist[-1:], pred], axis=0)
            (pline,) = ax.plot(
                seg[:, 0],
                seg[:, 1],
                color=color,
                linestyle=":",
                marker=".",
                markersize=3,
                linewidth=1.0,
                alpha=0.85,
                zorder=5,
            )
            pline.set_gid(f"agent-{i}-head-{h}")
            label = ax.annotate(
                f"{forecast.probabilities[i, h]:.2f}",
                xy=(pred[-1, 0], pred[-1, 1]),
                fontsize=7,
                color=color,
            )
            label.set_gid(f"agent-{i}-head-{h}-label")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("observed (solid), ground truth (green), predicted (dotted)")
    return fig


def render_metric_figure(report) -> "plt.Figure":
    """Grouped bars of model vs baseline minADE/minFDE per horizon."""
    taus = sorted(report.model)
    x = np.arange(len(taus), dtype=np.float64)
    width = 0.2
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    series = [
        ("model minADE", [report.model[t].min_ade for t in taus], "#1f77b4"),
        ("model minFDE", [report.model[t].min_fde for t in taus], "#aec7e8"),
        ("baseline minADE", [report.baseline[t].min_ade for t in taus], "#d62728"),
        ("baseline minFDE", [report.baseline[t].min_fde for t in taus], "#ff9896"),
    ]
    for k, (label, values, color) in enumerate(series):
        ax.bar(x + (k - 1.5) * width, values, width, label=label, color=color)
    ax.set_xticks(x)
    ax.set_xticklabels([f"tau={t}" for t in taus])
    ax.set_ylabel("displacement error [m]")
    ax.legend(fontsize=8)
    ax.set_title(f"forecast metrics over {report.scenes} scenes")
    return fig


def save_figure(fig, path) -> None:
    try:
        fig.savefig(path, format="svg", bbox_inches="tight")
    finally:
        plt.close(fig)


def save_forecast_plot(
    path, scene: Scene, truth: GroundTruth | None = None, forecast: ForecastSet | None = None
) -> None:
    save_figure(render_forecast_figure(scene, truth, forecast), path)


def save_metric_plot(path, report) -> None:
    save_figure(render_metric_figure(report), path)
