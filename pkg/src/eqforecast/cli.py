"""Command-line interface: train, eval, predict, plot, gen."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import Config, load_config
from .evaluation import evaluate
from .generator import KINDS, ScenarioSpec, generate_scenes
from .layers import ModelParams
from .plotting import save_forecast_plot, save_metric_plot
from .predictor import forecast, select_trajectory
from .scene import SceneValidationError, validate_ground_truth, validate_scene
from .sceneio import load_scene_dir, read_forecast, read_scene, save_scene_dir, write_forecast
from .training import train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqforecast",
        description="SE(2)-equivariant multi-modal trajectory forecasting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from scratch")
    p_train.add_argument("--config", required=True, help="key=value config file")
    p_train.add_argument("--data", required=True, help="directory of scene files")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument(
        "--save-every", type=int, default=0, help="also checkpoint every N epochs"
    )

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--tau", default="10,20,30", help="comma-separated horizons")
    p_eval.add_argument("--miss-d", type=float, default=None, help="miss threshold [m]")
    p_eval.add_argument(
        "--out", default=None, help="write the report here, plus a figure alongside"
    )

    p_pred = sub.add_parser("predict", help="forecast one scene file")
    p_pred.add_argument("--ckpt", required=True)
    p_pred.add_argument("--scene", required=True)
    p_pred.add_argument("--out", required=True)

    p_plot = sub.add_parser("plot", help="render a scene (and forecast) to SVG")
    p_plot.add_argument("--scene", required=True)
    p_plot.add_argument("--forecast", default=None)
    p_plot.add_argument("--out", required=True)

    p_gen = sub.add_parser("gen", help="generate synthetic scenes")
    p_gen.add_argument("--kind", required=True, choices=KINDS)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--modes", type=int, default=2, help="fork branch count")
    p_gen.add_argument("--speed", type=float, default=10.0)
    p_gen.add_argument("--radius", type=float, default=20.0)
    p_gen.add_argument("--sigma", type=float, default=0.0)
    p_gen.add_argument("--config", default=None, help="take scene dimensions from this config")
    return parser


def _load_pairs(data_dir: str, config: Config, need_truth: bool):
    pairs = load_scene_dir(data_dir)
    if not pairs:
        raise ValueError(f"no scene files found in {data_dir}")
    out = []
    for index, (scene, truth) in enumerate(pairs):
        violations = validate_scene(scene, config)
        if truth is None:
            if need_truth:
                raise ValueError(f"scene {index} in {data_dir} has no ground truth")
        else:
            violations += validate_ground_truth(truth, config)
        if violations:
            raise SceneValidationError(
                [f"scene {index}: {v}" for v in violations]
            )
        out.append((scene, truth))
    return out


def _cmd_train(args) -> int:
    config = load_config(args.config)
    pairs = _load_pairs(args.data, config, need_truth=True)
    result = train(
        config, pairs, out_path=args.out, save_every=args.save_every, log_fn=print
    )
    print(f"checkpoint written to {args.out} ({result.params.count()} parameters)")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    config = ckpt.config
    params = ModelParams.from_arrays(ckpt.params)
    pairs = _load_pairs(args.data, config, need_truth=True)
    taus = tuple(int(t) for t in args.tau.split(",") if t)
    report = evaluate(params, config, pairs, taus=taus, miss_threshold=args.miss_d)
    text = report.to_text()
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.write_text(text)
        figure_path = out.with_suffix(".svg")
        save_metric_plot(figure_path, report)
        print(f"report written to {out}, figure to {figure_path}")
    return 0


def _cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    params = ModelParams.from_arrays(ckpt.params)
    scene, _ = read_scene(args.scene)
    forecast_set = forecast(scene, params, ckpt.config)
    selected, _, _ = select_trajectory(forecast_set)
    write_forecast(forecast_set, selected, args.out)
    print(f"forecast written to {args.out}")
    return 0


def _cmd_plot(args) -> int:
    scene, truth = read_scene(args.scene)
    forecast_set = None
    if args.forecast is not None:
        forecast_set, _ = read_forecast(args.forecast)
    save_forecast_plot(args.out, scene, truth, forecast_set)
    print(f"figure written to {args.out}")
    return 0


def _cmd_gen(args) -> int:
    config = load_config(args.config) if args.config else Config()
    spec = ScenarioSpec(
        kind=args.kind,
        speed=args.speed,
        turn_radius=args.radius,
        mode_count=args.modes,
        noise_sigma=args.sigma,
    )
    pairs = generate_scenes(
        spec,
        args.n,
        args.seed,
        num_agents=config.num_agents,
        t_in=config.t_in,
        t_out=config.t_out,
        num_lanes=config.num_lanes,
        lane_points=config.lane_points,
        rate_hz=config.sample_rate_hz,
    )
    written = save_scene_dir(pairs, args.out, rate_hz=config.sample_rate_hz)
    print(f"wrote {len(written)} scenes to {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "plot": _cmd_plot,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
