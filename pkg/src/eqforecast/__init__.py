"""SE(2)-equivariant multi-modal trajectory forecasting on a from-scratch
reverse-mode autodiff engine."""

from .autodiff import Value, backward, constant, grad_check, param
from .config import Config, load_config, parse_config, save_config
from .layers import ModelParams
from .objective import LossBreakdown, MetricReport, combined_loss, evaluate_metrics
from .predictor import build_params, forecast, select_trajectory
from .scene import (
    ForecastSet,
    GroundTruth,
    Scene,
    SceneValidationError,
    Se2Transform,
    constant_velocity_forecast,
)
from .training import TrainingDiverged, train

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ForecastSet",
    "GroundTruth",
    "LossBreakdown",
    "MetricReport",
    "ModelParams",
    "Scene",
    "SceneValidationError",
    "Se2Transform",
    "TrainingDiverged",
    "Value",
    "backward",
    "build_params",
    "combined_loss",
    "constant",
    "constant_velocity_forecast",
    "evaluate_metrics",
    "forecast",
    "grad_check",
    "load_config",
    "param",
    "parse_config",
    "save_config",
    "select_trajectory",
    "train",
    "__version__",
]
