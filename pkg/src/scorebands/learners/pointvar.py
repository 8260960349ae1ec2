"""Point regressor with an optional local-spread head.

The mean head minimizes squared error. The spread head is fit afterwards to
the absolute residuals of the frozen mean head and is floored at a small
positive value so it can safely normalize nonconformity scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import MLPParams, Standardizer, TrainConfig, fit_mlp, forward, squared_head


@dataclass(frozen=True)
class PointVarModel:
    mean_params: MLPParams
    scaler: Standardizer
    sigma_params: MLPParams | None = None
    sigma_floor: float = 1e-3

    def predict_mean(self, X: np.ndarray) -> np.ndarray:
        _, out = forward(self.mean_params, self.scaler.transform(X))
        return out[:, 0]

    def predict_sigma(self, X: np.ndarray) -> np.ndarray:
        if self.sigma_params is None:
            raise ValueError("model was fitted without a spread head")
        _, out = forward(self.sigma_params, self.scaler.transform(X))
        return np.maximum(out[:, 0], self.sigma_floor)


def fit_point_var(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    fit_sigma: bool = True,
    sigma_floor: float = 1e-3,
) -> PointVarModel:
    if len(X) == 0:
        raise ValueError("cannot fit on an empty training set")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    mean_params = fit_mlp(Xs, y, 1, squared_head, cfg)
    sigma_params = None
    if fit_sigma:
        _, out = forward(mean_params, Xs)
        abs_resid = np.abs(y - out[:, 0])
        sigma_params = fit_mlp(Xs, abs_resid, 1, squared_head, cfg)
    return PointVarModel(
        mean_params=mean_params,
        scaler=scaler,
        sigma_params=sigma_params,
        sigma_floor=sigma_floor,
    )
