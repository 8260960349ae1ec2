"""Conditional histogram estimator: softmax over equal-width label bins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import (
    MLPParams,
    Standardizer,
    TrainConfig,
    fit_mlp,
    forward,
    log_softmax,
    softmax_ce_head,
)


@dataclass(frozen=True)
class HistDensityModel:
    """Per-input probabilities over n_bins equal bins spanning [lo, hi]."""

    params: MLPParams
    scaler: Standardizer
    n_bins: int
    lo: float
    hi: float

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def bin_edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.n_bins + 1)

    def bin_centers(self) -> np.ndarray:
        return self.lo + self.bin_width * (np.arange(self.n_bins) + 0.5)

    def bin_index(self, y: float) -> int:
        idx = int((y - self.lo) / self.bin_width)
        return min(max(idx, 0), self.n_bins - 1)

    def predict_log_proba(self, X: np.ndarray) -> np.ndarray:
        _, out = forward(self.params, self.scaler.transform(X))
        return log_softmax(out)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))

    def expected_value(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X) @ self.bin_centers()


def fit_hist_density(
    X: np.ndarray,
    y: np.ndarray,
    n_bins: int,
    cfg: TrainConfig,
    lo: float = 0.5,
    hi: float = 5.5,
) -> HistDensityModel:
    """Cross-entropy fit on binned labels."""
    if len(X) == 0:
        raise ValueError("cannot fit on an empty training set")
    if n_bins < 2:
        raise ValueError(f"need at least 2 bins, got {n_bins}")
    width = (hi - lo) / n_bins
    targets = np.clip(((y - lo) / width).astype(np.intp), 0, n_bins - 1)
    scaler = Standardizer.fit(X)
    params = fit_mlp(scaler.transform(X), targets, n_bins, softmax_ce_head, cfg)
    return HistDensityModel(params=params, scaler=scaler, n_bins=n_bins, lo=lo, hi=hi)
