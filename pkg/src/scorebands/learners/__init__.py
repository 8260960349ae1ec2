"""Trainable regression backends consumed by the conformal constructors."""

from .boosted import (
    BoostedModel,
    absolute_gradient,
    absolute_loss,
    fit_boosted,
    pinball_gradient,
    pinball_loss,
)
from .grid import GridClassifier, GridConfig, fit_grid_classifier, grid_log_density
from .histdensity import HistDensityModel, fit_hist_density
from .nets import Standardizer, TrainConfig, load_mlp, save_mlp
from .pointvar import PointVarModel, fit_point_var
from .quantile import QuantileComponent, QuantileModel, fit_quantile, fit_quantile_model

__all__ = [
    "BoostedModel",
    "GridClassifier",
    "GridConfig",
    "HistDensityModel",
    "PointVarModel",
    "QuantileComponent",
    "QuantileModel",
    "Standardizer",
    "TrainConfig",
    "absolute_gradient",
    "absolute_loss",
    "fit_boosted",
    "fit_grid_classifier",
    "fit_hist_density",
    "fit_point_var",
    "fit_quantile",
    "fit_quantile_model",
    "grid_log_density",
    "load_mlp",
    "pinball_gradient",
    "pinball_loss",
    "save_mlp",
]
