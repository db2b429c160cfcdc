"""The monitoring problem: formula, timing, agent and graph model."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ..logic import ast as A
from ..logic.expr import BALL_NORMS
from ..logic.parser import parse
from ..logic.transform import formula_length, to_pnf
from ..semantics.graph import WeightSpec
from ..semantics.robust import RobustEvaluator, as_trajectory

ACCURATE, INTERP1, INTERP2 = "accurate", "interp1", "interp2"
METHODS = (ACCURATE, INTERP1, INTERP2)


@dataclass(frozen=True, eq=False)
class MonitorProblem:
    """What is monitored and when.

    Parameters
    ----------
    formula : str or Formula
    dialect : {"stl", "strel"}
        STL flattens all agents into one global state; STREL evaluates at ``agent``.
    tau0 : int
        Time at which the formula is enabled.
    t : int
        Current time; states ``0..t`` are observed.
    agent : int
        1-based agent label (STREL only).
    weights : WeightSpec, optional
        Graph model; required if the formula has spatial operators.
    ball_norm : {"2", "inf"}
        Norm of the state-error balls used by interpretable Variant I.
    """

    formula: object
    dialect: str = "stl"
    tau0: int = 0
    t: int = 0
    agent: int = 1
    weights: Optional[WeightSpec] = None
    ball_norm: str = "2"
    _parsed: A.Formula = field(init=False, repr=False)

    def __post_init__(self):
        f = self.formula
        if isinstance(f, str):
            f = parse(f, self.dialect)
        elif not isinstance(f, A.Formula):
            raise TypeError("formula must be DSL text or a Formula")
        if self.dialect not in ("stl", "strel"):
            raise ValueError(f"unknown dialect {self.dialect!r}")
        if self.dialect == "stl" and f.is_spatial():
            raise ValueError("spatial operators require the strel dialect")
        if f.is_spatial() and self.weights is None:
            raise ValueError("spatial formulas need a weight specification")
        if self.ball_norm not in BALL_NORMS:
            raise ValueError(f"ball_norm must be one of {BALL_NORMS}")
        if self.tau0 < 0 or self.t < 0:
            raise ValueError("tau0 and t must be non-negative")
        if self.agent < 1:
            raise ValueError("agent labels start at 1")
        object.__setattr__(self, "_parsed", f)
        if self.H < 0:
            raise ValueError(
                f"nothing to predict: tau0 + formula length = {self.tau0 + self.length} <= t"
            )

    @property
    def ast(self) -> A.Formula:
        return self._parsed

    @property
    def text(self) -> str:
        return self._parsed.text()

    @cached_property
    def length(self) -> int:
        return formula_length(self._parsed)

    @property
    def H(self) -> int:
        """Prediction horizon ``tau0 + L - t``."""
        return self.tau0 + self.length - self.t

    @property
    def n_steps(self) -> int:
        """Length ``t + H + 1`` of observed-plus-predicted trajectories."""
        return self.t + self.H + 1

    @property
    def spatial(self) -> bool:
        return self._parsed.is_spatial()

    @cached_property
    def pnf(self) -> A.Formula:
        return to_pnf(self._parsed)

    @cached_property
    def pnf_predicates(self) -> tuple:
        return tuple(self.pnf.predicates())

    def view(self, x) -> np.ndarray:
        """Trajectory in the layout the semantics operate on: ``(T, L', n')``."""
        x = as_trajectory(x)
        if self.dialect == "stl":
            return x.reshape(x.shape[0], 1, -1)
        return x

    def agent_index(self, L: int) -> int:
        if self.dialect == "stl":
            return 0
        if self.agent > L:
            raise ValueError(f"agent {self.agent} out of range 1..{L}")
        return self.agent - 1

    def agents(self, L: int) -> np.ndarray:
        """0-based agents whose predicate values can influence the verdict (in the view)."""
        if self.dialect == "stl" or not self.spatial:
            return np.array([self.agent_index(L)])
        return np.arange(L)

    def evaluator(self, xv: np.ndarray, predicate_values=None, graphs=None) -> RobustEvaluator:
        return RobustEvaluator(xv, self.weights, predicate_values, graphs)

    def robustness(self, x, predicate_values=None, graphs=None, formula=None) -> float:
        """Robust semantics at ``(tau0, agent)``; ``x`` is a raw trajectory."""
        xv = self.view(x)
        return self.robustness_view(xv, predicate_values, graphs, formula)

    def robustness_view(self, xv, predicate_values=None, graphs=None, formula=None) -> float:
        f = self._parsed if formula is None else formula
        need = self.tau0 + self.length
        if need >= xv.shape[0]:
            raise ValueError(f"trajectory has {xv.shape[0]} steps, need {need + 1}")
        trace = self.evaluator(xv, predicate_values, graphs)(f)
        return float(trace[self.tau0, self.agent_index(xv.shape[1])])

    def predicate_table(self, xv: np.ndarray) -> np.ndarray:
        """Values of every PNF predicate on a viewed trajectory, shape ``(P, T, L')``."""
        preds = self.pnf_predicates
        if not preds:
            return np.empty((0,) + xv.shape[:2])
        return np.stack([p.comparison.evaluate(xv) for p in preds])
