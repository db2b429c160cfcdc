"""Convenience entry points and an sklearn-style estimator."""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_dataset
from ..conformal import DivergenceSpec
from ..semantics.graph import WeightSpec
from ..semantics.robust import as_trajectory
from .methods import (
    ALPHA_FLOOR,
    CalibrationArtifact,
    VerificationVerdict,
    calibrate,
    verify,
)
from .problem import ACCURATE, INTERP1, INTERP2, MonitorProblem


def predict_full(problem: MonitorProblem, predictor, X) -> np.ndarray:
    """Observed prefixes of ``X`` completed with ``H`` predicted steps."""
    X = check_dataset(X)
    return predictor.predict_many(X[:, : problem.t + 1], problem.H)


def problem_from_artifact(art: CalibrationArtifact, weights: Optional[WeightSpec] = None) -> MonitorProblem:
    return MonitorProblem(art.formula, art.dialect, art.tau0, art.t, art.agent, weights, art.ball_norm)


def _predictor_meta(predictor) -> dict:
    return {"class": type(predictor).__name__, "params": {k: repr(v) for k, v in predictor.get_params().items()}}


def _calibrate(method, formula, calib, predictor, delta, div, tau0, t, weights=None,
               agent=1, alpha_set=None, dialect=None, ball_norm="2", alpha_floor=ALPHA_FLOOR):
    dialect = dialect or ("strel" if weights is not None else "stl")
    problem = MonitorProblem(formula, dialect, tau0, t, agent, weights, ball_norm)
    X_hat = predict_full(problem, predictor, calib)
    kwargs = {}
    if method != ACCURATE:
        if alpha_set is None:
            raise ValueError("interpretable methods need an alpha dataset")
        kwargs = dict(X_alpha=alpha_set, X_hat_alpha=predict_full(problem, predictor, alpha_set))
    return calibrate(problem, method, calib, X_hat, delta, div, alpha_floor=alpha_floor,
                     predictor=_predictor_meta(predictor), **kwargs)


def calibrate_accurate(formula, calib, predictor, delta, div, tau0, t, weights=None, agent=1, **kw):
    return _calibrate(ACCURATE, formula, calib, predictor, delta, div, tau0, t, weights, agent, **kw)


def calibrate_interp1(formula, calib, alpha_set, predictor, delta, div, tau0, t, weights=None, agent=1, **kw):
    return _calibrate(INTERP1, formula, calib, predictor, delta, div, tau0, t, weights, agent,
                      alpha_set=alpha_set, **kw)


def calibrate_interp2(formula, calib, alpha_set, predictor, delta, div, tau0, t, weights=None, agent=1, **kw):
    return _calibrate(INTERP2, formula, calib, predictor, delta, div, tau0, t, weights, agent,
                      alpha_set=alpha_set, **kw)


def verify_observation(art: CalibrationArtifact, x_obs, predictor, weights=None) -> VerificationVerdict:
    """Predict the future of ``x_obs`` (states ``0..t``) and issue a verdict."""
    problem = problem_from_artifact(art, weights)
    obs = as_trajectory(x_obs)
    if obs.shape[0] < problem.t + 1:
        raise ValueError(f"observation has {obs.shape[0]} steps, need {problem.t + 1}")
    obs = obs[: problem.t + 1]
    x_hat = np.concatenate([obs, predictor.predict(obs, problem.H)])
    return verify(problem, art, x_hat)


verify_accurate = verify_interp1 = verify_interp2 = verify_observation


class PredictiveMonitor(BaseEstimator):
    """Calibrate once on trajectories from the design distribution, then verify online.

    Parameters
    ----------
    formula : str
        Specification in the formula DSL.
    dialect : {"stl", "strel"}
    method : {"accurate", "interp1", "interp2"}
    delta : float
        Miscoverage level; verdicts hold with probability at least ``1 - delta``.
    epsilon : float
        Radius of the f-divergence ball around the design distribution.
    divergence : str
        ``"tv"`` (closed form) or another named divergence (numeric path).
    tau0, t : int
        Formula enabling time and current time.
    agent : int
        1-based agent label for STREL.
    weights : WeightSpec, optional
    ball_norm : {"2", "inf"}
    alpha_floor : float
    predictor : TrajectoryPredictor, optional
        Fitted predictor; needed unless predictions are passed explicitly.

    Attributes
    ----------
    artifact_ : CalibrationArtifact
    problem_ : MonitorProblem
    """

    def __init__(self, formula="true", dialect="stl", method="accurate", delta=0.2,
                 epsilon=0.0, divergence="tv", tau0=0, t=0, agent=1, weights=None,
                 ball_norm="2", alpha_floor=ALPHA_FLOOR, predictor=None):
        self.formula = formula
        self.dialect = dialect
        self.method = method
        self.delta = delta
        self.epsilon = epsilon
        self.divergence = divergence
        self.tau0 = tau0
        self.t = t
        self.agent = agent
        self.weights = weights
        self.ball_norm = ball_norm
        self.alpha_floor = alpha_floor
        self.predictor = predictor

    def _predict_or(self, X, X_hat):
        if X_hat is not None:
            return check_dataset(X_hat, "X_hat")
        if self.predictor is None:
            raise ValueError("pass predictions or set a predictor")
        return predict_full(self.problem_, self.predictor, X)

    def fit(self, X, X_alpha=None, X_hat=None, X_hat_alpha=None):
        """Calibrate on ``X`` (and ``X_alpha`` for interpretable methods)."""
        self.problem_ = MonitorProblem(self.formula, self.dialect, self.tau0, self.t,
                                       self.agent, self.weights, self.ball_norm)
        div = DivergenceSpec(self.divergence, self.epsilon)
        X_hat = self._predict_or(X, X_hat)
        kwargs = {}
        if self.method != ACCURATE:
            if X_alpha is None:
                raise ValueError("interpretable methods need X_alpha")
            kwargs = dict(X_alpha=X_alpha, X_hat_alpha=self._predict_or(X_alpha, X_hat_alpha))
        meta = _predictor_meta(self.predictor) if self.predictor is not None else {}
        self.artifact_ = calibrate(self.problem_, self.method, X, X_hat, self.delta, div,
                                   alpha_floor=self.alpha_floor, predictor=meta, **kwargs)
        return self

    def verify(self, x_obs=None, x_hat=None) -> VerificationVerdict:
        check_is_fitted(self, "artifact_")
        if x_hat is None:
            return verify_observation(self.artifact_, x_obs, self.predictor, self.weights)
        return verify(self.problem_, self.artifact_, x_hat)

    def predict(self, X_obs=None, X_hat=None) -> np.ndarray:
        """Lower bounds ``rho_star`` for a batch of observations (or predictions)."""
        check_is_fitted(self, "artifact_")
        if X_hat is None:
            X_obs = check_dataset(X_obs, "X_obs")
            X_hat = predict_full(self.problem_, self.predictor, X_obs)
        return np.array([verify(self.problem_, self.artifact_, xh).rho_star for xh in X_hat])
