"""Nonconformity scores, calibration and verification for the three methods.

accurate
    Score ``rho(X_hat) - rho(X)``; bound ``rho(X_hat) - C``.
interp1
    Score ``max_{tau,l} ||X_tau[l] - X_hat_tau[l]|| / alpha_{tau,l}``; each
    predicate is bounded by its infimum over the ball of radius ``C alpha``.
interp2
    Score ``max_{pi,tau,l} (rho^pi(X_hat) - rho^pi(X)) / alpha_{pi,tau,l}``;
    bound ``rho^pi(X_hat) - C alpha``.

Interpretable bounds are combined by the robust semantics of the
negation-free formula with observed predicate values up to ``t``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .._validation import check_dataset, check_probability
from ..conformal import DivergenceSpec, robust_quantile
from .problem import ACCURATE, INTERP1, INTERP2, METHODS, MonitorProblem

ALPHA_FLOOR = 1e-8


def accurate_score(rho_hat: float, rho_true: float) -> float:
    if rho_hat == rho_true:
        return 0.0
    return float(rho_hat - rho_true)


def _future(problem: MonitorProblem) -> slice:
    return slice(problem.t + 1, problem.t + problem.H + 1)


def _trim(problem: MonitorProblem, xv: np.ndarray) -> np.ndarray:
    if xv.shape[0] < problem.n_steps:
        raise ValueError(f"trajectory has {xv.shape[0]} steps, need {problem.n_steps}")
    return xv[: problem.n_steps]


def state_errors(problem: MonitorProblem, xv_true: np.ndarray, xv_hat: np.ndarray) -> np.ndarray:
    """Per-(tau, agent) prediction error norms over the full agent state, ``(H, La)``."""
    fut = _future(problem)
    agents = problem.agents(xv_true.shape[1])
    diff = xv_hat[fut][:, agents] - xv_true[fut][:, agents]
    order = 2 if problem.ball_norm == "2" else np.inf
    if diff.shape[0] == 0:
        return np.zeros((0, len(agents)))
    return np.linalg.norm(diff, ord=order, axis=-1)


def predicate_errors(problem: MonitorProblem, table_true: np.ndarray, table_hat: np.ndarray) -> np.ndarray:
    """``rho^pi(X_hat) - rho^pi(X)`` on future times and relevant agents, ``(P, H, La)``."""
    fut = _future(problem)
    agents = problem.agents(table_true.shape[2])
    return table_hat[:, fut][:, :, agents] - table_true[:, fut][:, :, agents]


def fit_alpha(errors: np.ndarray, floor: float = ALPHA_FLOOR) -> np.ndarray:
    """Normalizing constants: max absolute error over a dataset, floored at ``floor``."""
    errors = np.asarray(errors, dtype=float)
    if errors.shape[0] == 0:
        raise ValueError("alpha dataset is empty")
    return np.maximum(np.abs(errors).max(axis=0), floor)


def normalized_scores(errors: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """``max`` over all but the first axis of ``errors / alpha``."""
    errors = np.asarray(errors, dtype=float)
    ratio = (errors / alpha).reshape(errors.shape[0], -1)
    return ratio.max(axis=1, initial=-np.inf)


def interp1_bounds(problem: MonitorProblem, xv_hat: np.ndarray, C: float, alpha: np.ndarray) -> tuple:
    """Variant I predicate bounds ``(P, H, La)`` and ball radii ``(H, La)``."""
    preds = problem.pnf_predicates
    fut = _future(problem)
    agents = problem.agents(xv_hat.shape[1])
    radius = np.full(alpha.shape, np.inf) if math.isinf(C) else C * alpha
    centers = xv_hat[fut][:, agents]
    out = np.empty((len(preds),) + alpha.shape)
    for k, p in enumerate(preds):
        if math.isinf(C):
            out[k] = -np.inf
        else:
            out[k] = p.comparison.ball_infimum(centers, radius, problem.ball_norm)
    return out, radius


def interp2_bounds(problem: MonitorProblem, table_hat: np.ndarray, C: float, alpha: np.ndarray) -> np.ndarray:
    """Variant II predicate bounds ``(P, H, La)``."""
    fut = _future(problem)
    agents = problem.agents(table_hat.shape[2])
    if math.isinf(C):
        return np.full(alpha.shape, -np.inf if C > 0 else np.inf)
    return table_hat[:, fut][:, :, agents] - C * alpha


def rho_bar(problem: MonitorProblem, xv_hat: np.ndarray, table_hat: np.ndarray,
            bounds: np.ndarray, graphs: Optional[dict] = None) -> float:
    """Probabilistic robust semantics: observed predicate values up to ``t``, bounds after."""
    fut = _future(problem)
    agents = problem.agents(xv_hat.shape[1])
    overrides = {}
    for k, p in enumerate(problem.pnf_predicates):
        vals = table_hat[k].copy()
        block = vals[fut]
        block[:, agents] = bounds[k]
        vals[fut] = block
        overrides[p.id] = vals
    return problem.robustness_view(xv_hat, overrides, graphs, formula=problem.pnf)


def _encode(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return v


@dataclass
class CalibrationArtifact:
    """Everything needed to issue verdicts at runtime."""

    method: str
    dialect: str
    formula: str
    tau0: int
    t: int
    H: int
    delta: float
    epsilon: float
    divergence: str
    K: int
    C: float
    quantile_index: Optional[int]
    alpha: Optional[np.ndarray] = None
    alpha_floor: float = ALPHA_FLOOR
    ball_norm: str = "2"
    agent: int = 1
    weights: Optional[str] = None
    predicate_ids: list = field(default_factory=list)
    predictor: dict = field(default_factory=dict)
    splits: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not math.isinf(self.C)

    @property
    def kind(self) -> str:
        return f"{self.method}-{self.dialect}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = None if self.alpha is None else np.asarray(self.alpha).tolist()
        d["kind"] = self.kind
        for k in ("C", "epsilon", "delta"):
            d[k] = _encode(float(d[k]))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationArtifact":
        d = dict(d)
        d.pop("kind", None)
        for k in ("C", "epsilon", "delta"):
            d[k] = float(_decode(d[k]))
        if d.get("alpha") is not None:
            d["alpha"] = np.asarray(d["alpha"], dtype=float)
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationArtifact":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "CalibrationArtifact":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class PredicateBound:
    predicate: int
    tau: int
    agent: Optional[int]
    value: float
    radius: Optional[float] = None


@dataclass(frozen=True, eq=False)
class VerificationVerdict:
    """Lower bound ``rho_star`` holding with probability at least ``level``."""

    rho_star: float
    level: float
    method: str
    bounds: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None
    predicate_ids: tuple = ()
    times: tuple = ()
    agents: tuple = ()

    @property
    def satisfied(self) -> bool:
        return self.rho_star > 0

    def predicate_bounds(self) -> list:
        """One entry per element of the predicate/time(/agent) index set."""
        if self.bounds is None:
            return []
        out = []
        for k, pid in enumerate(self.predicate_ids):
            for i, tau in enumerate(self.times):
                for j, ag in enumerate(self.agents):
                    r = None if self.radii is None else float(self.radii[i, j])
                    out.append(PredicateBound(pid, tau, ag, float(self.bounds[k, i, j]), r))
        return out


def calibration_data(problem: MonitorProblem, method: str, X, X_hat) -> np.ndarray:
    """Method-specific raw errors for a dataset of true and predicted trajectories.

    accurate: scores ``(M,)``; interp1: state errors ``(M, H, La)``;
    interp2: predicate errors ``(M, P, H, La)``.
    """
    X = check_dataset(X, "X")
    X_hat = check_dataset(X_hat, "X_hat")
    if X.shape[0] != X_hat.shape[0]:
        raise ValueError("X and X_hat must contain the same number of trajectories")
    out = []
    for x, xh in zip(X, X_hat):
        xv = _trim(problem, problem.view(x))
        xhv = _trim(problem, problem.view(xh))
        if method == ACCURATE:
            out.append(accurate_score(problem.robustness_view(xhv), problem.robustness_view(xv)))
        elif method == INTERP1:
            out.append(state_errors(problem, xv, xhv))
        elif method == INTERP2:
            out.append(predicate_errors(problem, problem.predicate_table(xv), problem.predicate_table(xhv)))
        else:
            raise ValueError(f"unknown method {method!r}")
    return np.asarray(out, dtype=float)


def calibrate(problem: MonitorProblem, method: str, X, X_hat, delta: float,
              divergence: DivergenceSpec, X_alpha=None, X_hat_alpha=None,
              alpha_floor: float = ALPHA_FLOOR, predictor: Optional[dict] = None,
              splits: Optional[dict] = None) -> CalibrationArtifact:
    """Compute scores on the calibration set and the robust conformal quantile."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    check_probability(delta, "delta")
    if method != ACCURATE:
        problem.pnf  # raises if negations cannot be eliminated
        if X_alpha is None or X_hat_alpha is None:
            raise ValueError("interpretable methods need a separate alpha dataset")
    alpha = None
    data = calibration_data(problem, method, X, X_hat)
    if method == ACCURATE:
        scores = data
    else:
        alpha = fit_alpha(calibration_data(problem, method, X_alpha, X_hat_alpha), alpha_floor)
        scores = normalized_scores(data, alpha)
    return artifact_from_scores(problem, method, scores, delta, divergence, alpha,
                                alpha_floor, predictor, splits)


def artifact_from_scores(problem: MonitorProblem, method: str, scores, delta: float,
                         divergence: DivergenceSpec, alpha=None, alpha_floor=ALPHA_FLOOR,
                         predictor=None, splits=None) -> CalibrationArtifact:
    q = robust_quantile(scores, delta, divergence)
    return CalibrationArtifact(
        method=method,
        dialect=problem.dialect,
        formula=problem.text,
        tau0=problem.tau0,
        t=problem.t,
        H=problem.H,
        delta=float(delta),
        epsilon=float(divergence.epsilon),
        divergence=divergence.kind,
        K=int(np.size(scores)),
        C=float(q.value),
        quantile_index=q.index,
        alpha=alpha,
        alpha_floor=alpha_floor,
        ball_norm=problem.ball_norm,
        agent=problem.agent,
        weights=None if problem.weights is None else problem.weights.describe(),
        predicate_ids=[p.id for p in problem.pnf_predicates] if method != ACCURATE else [],
        predictor=dict(predictor or {}),
        splits=dict(splits or {}),
    )


def verify(problem: MonitorProblem, artifact: CalibrationArtifact, x_hat,
           graphs: Optional[dict] = None, table_hat: Optional[np.ndarray] = None) -> VerificationVerdict:
    """Issue a verdict from an observed-plus-predicted trajectory of length ``t + H + 1``."""
    xhv = _trim(problem, problem.view(x_hat))
    level = 1.0 - artifact.delta
    method = artifact.method
    if method == ACCURATE:
        rho = -math.inf if not artifact.feasible else problem.robustness_view(xhv, graphs=graphs) - artifact.C
        return VerificationVerdict(rho, level, method)
    if table_hat is None:
        table_hat = problem.predicate_table(xhv)
    radii = None
    if method == INTERP1:
        bounds, radii = interp1_bounds(problem, xhv, artifact.C, artifact.alpha)
    else:
        bounds = interp2_bounds(problem, table_hat, artifact.C, artifact.alpha)
    rho = rho_bar(problem, xhv, table_hat, bounds, graphs) if artifact.feasible else -math.inf
    agents = problem.agents(xhv.shape[1])
    times = tuple(range(problem.t + 1, problem.t + problem.H + 1))
    labels = (None,) if problem.dialect == "stl" else tuple(int(a) + 1 for a in agents)
    return VerificationVerdict(
        rho, level, method, bounds, radii,
        tuple(p.id for p in problem.pnf_predicates), times, labels,
    )
