"""Grid-softmax conditional density: regression recast as classification.

The label range is discretized into a fine grid; a small network maps the
feature vector to a softmax distribution over grid points. The negative log
mass at a label's nearest grid point serves as a density nonconformity score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import (
    Standardizer,
    TrainConfig,
    fit_mlp,
    forward,
    log_softmax,
    softmax_ce_head,
)


@dataclass(frozen=True)
class GridConfig:
    """Uniform grid over an extended label range."""

    lo: float = 0.5
    hi: float = 5.5
    resolution: float = 0.125
    n_points: int = 41

    def __post_init__(self) -> None:
        span = (self.hi - self.lo) / self.resolution
        if abs(span - (self.n_points - 1)) > 1e-9:
            raise ValueError(
                f"grid of {self.n_points} points does not tile "
                f"[{self.lo}, {self.hi}] at resolution {self.resolution}"
            )

    def points(self) -> np.ndarray:
        return self.lo + self.resolution * np.arange(self.n_points)

    def nearest_index(self, y: float) -> int:
        """Index of the grid point nearest y; exact ties go to the lower point."""
        idx = math.ceil((y - self.lo) / self.resolution - 0.5)
        return min(max(idx, 0), self.n_points - 1)


@dataclass(frozen=True)
class GridClassifier:
    """Fitted softmax-over-grid density model."""

    params: list
    scaler: Standardizer
    grid: GridConfig

    def predict_log_proba(self, X: np.ndarray) -> np.ndarray:
        _, out = forward(self.params, self.scaler.transform(X))
        return log_softmax(out)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))

    def expected_value(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X) @ self.grid.points()


def fit_grid_classifier(
    X: np.ndarray, y: np.ndarray, grid: GridConfig, cfg: TrainConfig
) -> GridClassifier:
    """Cross-entropy fit against each label's nearest grid point."""
    if len(X) == 0:
        raise ValueError("cannot fit on an empty training set")
    targets = np.array([grid.nearest_index(float(v)) for v in y], dtype=np.intp)
    scaler = Standardizer.fit(X)
    params = fit_mlp(scaler.transform(X), targets, grid.n_points, softmax_ce_head, cfg)
    return GridClassifier(params=params, scaler=scaler, grid=grid)


def grid_log_density(model: GridClassifier, x: np.ndarray, y: float) -> float:
    """Log probability mass at the grid point nearest y (ties to lower)."""
    grid = model.grid
    if not grid.lo <= y <= grid.hi:
        raise ValueError(f"y={y} outside grid range [{grid.lo}, {grid.hi}]")
    logp = model.predict_log_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(logp[0, grid.nearest_index(y)])
