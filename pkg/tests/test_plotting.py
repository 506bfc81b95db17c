"""SVG output structure: per-agent groups, head series, error handling."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from eqforecast.evaluation import evaluate
from eqforecast.plotting import (
    PlotError,
    save_forecast_plot,
    save_metric_plot,
)
from eqforecast.predictor import build_params
from eqforecast.scene import ForecastSet

from conftest import manual_scene, manual_truth, scenes_for, small_config


def svg_gids(path):
    tree = ET.parse(path)
    ns = {"svg": "http://www.w3.org/2000/svg"}
    return {el.get("id") for el in tree.getroot().iter() if el.get("id")}


def random_forecast(rng, a, h, t):
    traj = rng.normal(0.0, 5.0, size=(a, h, t, 2))
    logits = rng.normal(size=(a, h))
    probs = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
    return ForecastSet(traj, probs)


def test_full_plot_groups_and_heads(tmp_path, rng):
    config = small_config(num_agents=3, num_heads=2)
    scene = manual_scene(config)
    truth = manual_truth(config, scene)
    fs = random_forecast(rng, 3, 6, config.t_out)
    out = tmp_path / "plot.svg"
    save_forecast_plot(out, scene, truth, fs)
    gids = svg_gids(out)
    for i in range(3):
        assert f"agent-{i}" in gids
        assert f"agent-{i}-truth" in gids
    # six dotted prediction series for the ego agent
    ego_heads = {g for g in gids if g.startswith("agent-0-head-") and not g.endswith("label")}
    assert ego_heads == {f"agent-0-head-{h}" for h in range(6)}
    labels = {g for g in gids if g.endswith("-label")}
    assert len(labels) == 3 * 6
    assert "lane-0" in gids


def test_history_only_plot(tmp_path):
    config = small_config()
    scene = manual_scene(config)
    out = tmp_path / "hist.svg"
    save_forecast_plot(out, scene)
    gids = svg_gids(out)
    assert "agent-0" in gids
    assert not any("head" in g for g in gids)
    assert not any("truth" in g for g in gids)


def test_masked_agents_are_not_drawn(tmp_path, rng):
    config = small_config(num_agents=3)
    scene = manual_scene(config, masked_agents=1)
    truth = manual_truth(config, scene)
    fs = random_forecast(rng, 3, 2, config.t_out)
    out = tmp_path / "masked.svg"
    save_forecast_plot(out, scene, truth, fs)
    gids = svg_gids(out)
    assert "agent-1" in gids
    assert "agent-2" not in gids
    assert not any(g.startswith("agent-2-") for g in gids)


def test_agent_count_mismatch_raises(tmp_path, rng):
    config = small_config(num_agents=3)
    scene = manual_scene(config)
    fs = random_forecast(rng, 2, 2, config.t_out)
    with pytest.raises(PlotError, match="forecast has 2 agents"):
        save_forecast_plot(tmp_path / "x.svg", scene, None, fs)
    truth = manual_truth(small_config(num_agents=2), manual_scene(small_config(num_agents=2)))
    with pytest.raises(PlotError, match="ground truth has 2 agents"):
        save_forecast_plot(tmp_path / "x.svg", scene, truth, None)


def test_metric_plot_is_valid_svg(tmp_path):
    config = small_config()
    pairs = scenes_for(config, 3, seed=40)
    params = build_params(config, seed=0)
    report = evaluate(params, config, pairs, taus=(2, 4))
    out = tmp_path / "metrics.svg"
    save_metric_plot(out, report)
    tree = ET.parse(out)
    assert tree.getroot().tag.endswith("svg")
