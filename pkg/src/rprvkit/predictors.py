"""Trajectory predictors.

Every predictor maps an observed prefix ``X_0..X_t`` (shape ``(t+1, L, n)``)
to ``H`` future states. Agents are predicted independently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dataset
from .semantics.robust import as_trajectory


@dataclass(frozen=True, eq=False)
class PredictedTrajectory:
    """Observed prefix plus ``H`` predicted states."""

    observed: np.ndarray
    predicted: np.ndarray

    @property
    def t(self) -> int:
        return self.observed.shape[0] - 1

    @property
    def H(self) -> int:
        return self.predicted.shape[0]

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.observed, self.predicted], axis=0)


class TrajectoryPredictor(BaseEstimator):
    """Base class; subclasses implement ``_rollout``."""

    min_observations = 2

    def fit(self, X, y=None):
        return self

    def _rollout(self, obs: np.ndarray, H: int) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x_obs, H: int) -> np.ndarray:
        """Predicted states for times ``t+1..t+H``, shape ``(H, L, n)``."""
        obs = as_trajectory(x_obs)
        if obs.shape[0] < self.min_observations:
            raise ValueError(
                f"need at least {self.min_observations} observations, got {obs.shape[0]}"
            )
        if H < 0:
            raise ValueError("horizon must be non-negative")
        if H == 0:
            return np.empty((0,) + obs.shape[1:])
        return self._rollout(obs, int(H))

    def predict_trajectory(self, x_obs, H: int) -> PredictedTrajectory:
        obs = as_trajectory(x_obs).copy()
        return PredictedTrajectory(obs, self.predict(obs, H))

    def predict_many(self, X_obs, H: int) -> np.ndarray:
        """Full trajectories ``(M, t+1+H, L, n)`` for a batch of prefixes."""
        X_obs = check_dataset(X_obs, "X_obs")
        return np.stack([np.concatenate([o, self.predict(o, H)]) for o in X_obs])


class ConstantVelocityPredictor(TrajectoryPredictor):
    """Extrapolates the mean velocity over the last ``window`` steps.

    ``window=1`` is the plain last first difference. Longer windows average
    out step noise while still tracking the observed speed.
    """

    def __init__(self, window: int = 1):
        self.window = window

    @property
    def min_observations(self):
        return int(self.window) + 1

    def fit(self, X=None, y=None):
        if int(self.window) < 1:
            raise ValueError("window must be at least 1")
        self.is_fitted_ = True
        return self

    def _rollout(self, obs, H):
        w = int(self.window)
        v = (obs[-1] - obs[-1 - w]) / w
        steps = np.arange(1, H + 1, dtype=float)[:, None, None]
        return obs[-1][None] + steps * v[None]


class ARPredictor(TrajectoryPredictor):
    """Per-dimension linear autoregression fitted by least squares.

    ``y[k] = c + sum_j a_j y[k-j]`` for each state dimension, pooled over
    agents, trajectories and sliding windows, where ``y`` is the state itself
    or, with ``difference=True``, its first difference (an ARIMA(p, 1, 0)
    model). Multi-step forecasts roll the model forward recursively.

    Parameters
    ----------
    order : int
        Number of lags ``p``.
    ridge : float
        Regularization used only when the normal equations are rank deficient.
    difference : bool
        Model first differences instead of levels.
    fit_intercept : bool
        Include the constant ``c``.
    """

    def __init__(self, order: int = 2, ridge: float = 1e-6, difference: bool = False,
                 fit_intercept: bool = True):
        self.order = order
        self.ridge = ridge
        self.difference = difference
        self.fit_intercept = fit_intercept

    @property
    def min_observations(self):
        return max(2, self.order + int(bool(self.difference)))

    def fit(self, X, y=None):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        X = check_dataset(X)
        if self.difference:
            X = np.diff(X, axis=1)
        M, T, L, n = X.shape
        p = self.order
        if T <= p:
            raise ValueError(f"trajectories of length {T} are too short for order {p}")
        k0 = int(bool(self.fit_intercept))
        coef = np.zeros((n, p + 1))
        self.used_ridge_ = np.zeros(n, dtype=bool)
        for i in range(n):
            series = X[:, :, :, i].transpose(0, 2, 1).reshape(M * L, T)
            lags = np.stack([series[:, p - j : T - j] for j in range(1, p + 1)], axis=-1)
            if k0:
                lags = np.concatenate([np.ones(lags.shape[:-1] + (1,)), lags], axis=-1)
            A = lags.reshape(-1, p + k0)
            b = series[:, p:].reshape(-1)
            G = A.T @ A
            if np.linalg.matrix_rank(G) < p + k0:
                G = G + self.ridge * np.eye(p + k0)
                self.used_ridge_[i] = True
            coef[i, 1 - k0 :] = np.linalg.solve(G, A.T @ b)
        if not np.all(np.isfinite(coef)):
            raise ValueError("non-finite autoregressive coefficients")
        self.intercept_ = coef[:, 0]
        self.coef_ = coef[:, 1:]
        self.n_train_ = M
        return self

    def _rollout(self, obs, H):
        check_is_fitted(self, "coef_")
        p = self.order
        if obs.shape[-1] != self.coef_.shape[0]:
            raise ValueError("state dimension differs from the training data")
        series = np.diff(obs, axis=0) if self.difference else obs
        hist = list(series[-p:])
        out = []
        for _ in range(H):
            # lag j is hist[-j]
            lagged = np.stack([hist[-j] for j in range(1, p + 1)], axis=-1)
            nxt = self.intercept_ + (lagged * self.coef_).sum(-1)
            hist.append(nxt)
            out.append(nxt)
        out = np.stack(out)
        if self.difference:
            return obs[-1][None] + np.cumsum(out, axis=0)
        return out


class ExternalPredictor(TrajectoryPredictor):
    """Precomputed predictions looked up by trial id.

    Parameters
    ----------
    predictions : dict
        Maps trial id to an array ``(H, L, n)`` of predicted future states.
    """

    def __init__(self, predictions: Optional[dict] = None):
        self.predictions = predictions

    def predict_trial(self, trial, H: int) -> np.ndarray:
        if self.predictions is None:
            raise NotFittedError("no external predictions loaded")
        if trial not in self.predictions:
            raise KeyError(f"no external prediction for trial {trial!r}")
        pred = np.asarray(self.predictions[trial], dtype=float)
        if pred.shape[0] < H:
            raise ValueError(f"trial {trial!r} has {pred.shape[0]} predicted steps, need {H}")
        return pred[:H]

    def _rollout(self, obs, H):
        raise TypeError("external predictions are looked up with predict_trial")


def make_predictor(kind: str, **kwargs) -> TrajectoryPredictor:
    if kind in ("cv", "constant-velocity"):
        return ConstantVelocityPredictor(**kwargs)
    if kind in ("ar", "linear-ar"):
        return ARPredictor(**kwargs)
    raise ValueError(f"unknown predictor {kind!r}")
