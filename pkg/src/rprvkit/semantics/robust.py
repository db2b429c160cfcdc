"""Robust (quantitative) semantics of STL and STREL.

Every node is evaluated for all time steps and agents at once and returns an
array of shape ``(V, L)`` where ``V`` is the number of leading time steps for
which the value is fully determined by the trajectory.
"""
from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..logic import ast as A
from ..logic.transform import desugar_surround, formula_length
from .graph import GraphSnapshot, WeightSpec, graph_at
from .spatial import escape, reach, somewhere


class TrajectoryTooShort(ValueError):
    pass


def as_trajectory(x) -> np.ndarray:
    """Coerce to a float array of shape ``(T, L, n)``; 2-D input is one agent."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None, None]
    elif x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3:
        raise ValueError(f"trajectory must have 1 to 3 dimensions, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("trajectory is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("trajectory entries must be finite")
    return x


def stl_view(x) -> np.ndarray:
    """Flatten all agents into one global state: ``(T, 1, L * n)``."""
    x = as_trajectory(x)
    return x.reshape(x.shape[0], 1, -1)


def until_window(r1: np.ndarray, r2: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """``sup_{k in [lo,hi]} min(r2[t+k], inf_{0<j<k} r1[t+j])`` for every valid ``t``."""
    V = min(len(r1), len(r2)) - hi
    if V <= 0:
        return np.empty((0,) + r1.shape[1:])
    best = np.full((V,) + r1.shape[1:], -np.inf)
    run = np.full_like(best, np.inf)
    for k in range(hi + 1):
        if k >= lo:
            best = np.maximum(best, np.minimum(r2[k : k + V], run))
        if k >= 1:
            run = np.minimum(run, r1[k : k + V])
    return best


def _window(r: np.ndarray, lo: int, hi: int, op) -> np.ndarray:
    V = len(r) - hi
    if V <= 0:
        return np.empty((0,) + r.shape[1:])
    out = r[lo : lo + V].copy()
    for k in range(lo + 1, hi + 1):
        out = op(out, r[k : k + V])
    return out


class RobustEvaluator:
    """Evaluates a formula on one trajectory.

    Parameters
    ----------
    x : array of shape (T, L, n)
    weights : WeightSpec, optional
        Required when the formula has spatial operators.
    predicate_values : mapping from predicate id to an array (T, L), optional
        Overrides the predicate function; used by the probabilistic robust
        semantics where future predicate values are replaced by bounds.
    graphs : mapping from time to GraphSnapshot, optional
        Precomputed snapshots (filled lazily otherwise).
    """

    def __init__(self, x, weights: Optional[WeightSpec] = None,
                 predicate_values: Optional[Mapping[int, np.ndarray]] = None,
                 graphs: Optional[dict] = None):
        self.x = as_trajectory(x)
        self.weights = weights
        self.overrides = predicate_values or {}
        self.graphs = {} if graphs is None else graphs
        self._memo: dict = {}

    def graph(self, tau: int) -> GraphSnapshot:
        g = self.graphs.get(tau)
        if g is None:
            if self.weights is None:
                raise ValueError("spatial operators require a weight specification")
            g = graph_at(self.weights, self.x, tau)
            self.graphs[tau] = g
        return g

    def predicate(self, node: A.Predicate) -> np.ndarray:
        if node.id in self.overrides:
            vals = np.asarray(self.overrides[node.id], dtype=float)
            if vals.shape != self.x.shape[:2]:
                raise ValueError(f"override for predicate {node.id} has shape {vals.shape}")
            return vals
        return node.comparison.evaluate(self.x)

    def __call__(self, node: A.Formula) -> np.ndarray:
        key = id(node)
        hit = self._memo.get(key)
        if hit is not None and hit[0] is node:
            return hit[1]
        out = self._eval(node)
        self._memo[key] = (node, out)
        return out

    def _spatial(self, V: int, fn) -> np.ndarray:
        L = self.x.shape[1]
        out = np.empty((V, L))
        for tau in range(V):
            out[tau] = fn(tau, self.graph(tau))
        return out

    def _eval(self, node: A.Formula) -> np.ndarray:
        T, L = self.x.shape[:2]
        if isinstance(node, A.TrueF):
            return np.full((T, L), np.inf)
        if isinstance(node, A.FalseF):
            return np.full((T, L), -np.inf)
        if isinstance(node, A.Predicate):
            return self.predicate(node)
        if isinstance(node, A.Not):
            return -self(node.arg)
        if isinstance(node, (A.And, A.Or)):
            a, b = self(node.left), self(node.right)
            V = min(len(a), len(b))
            op = np.minimum if isinstance(node, A.And) else np.maximum
            return op(a[:V], b[:V])
        if isinstance(node, A.Until):
            iv = node.interval
            return until_window(self(node.left), self(node.right), iv.first, iv.last)
        if isinstance(node, A.Eventually):
            return _window(self(node.arg), node.interval.first, node.interval.last, np.maximum)
        if isinstance(node, A.Always):
            return _window(self(node.arg), node.interval.first, node.interval.last, np.minimum)
        if isinstance(node, (A.Reach, A.Somewhere, A.Everywhere)):
            iv = node.interval
            if isinstance(node, A.Reach):
                s1, s2 = self(node.left), self(node.right)
                V = min(len(s1), len(s2))
                sign = 1.0
            else:
                s2 = self(node.arg)
                sign = -1.0 if isinstance(node, A.Everywhere) else 1.0
                s2 = sign * s2
                V = len(s2)
                if iv.lo == 0:
                    return sign * self._spatial(V, lambda t, g: somewhere(g.distances, s2[t], iv.hi))
                s1 = np.full_like(s2, np.inf)
            out = self._spatial(V, lambda t, g: reach(g.weights, s1[t], s2[t], iv.lo, iv.hi))
            return sign * out
        if isinstance(node, A.Escape):
            s1 = self(node.arg)
            iv = node.interval
            return self._spatial(
                len(s1), lambda t, g: escape(g.weights, g.distances, s1[t], iv.lo, iv.hi)
            )
        if isinstance(node, A.Surround):
            return self(desugar_surround(node))
        raise TypeError(f"unsupported formula node {type(node).__name__}")


def _check_horizon(f: A.Formula, T: int, tau0: int) -> None:
    if tau0 < 0:
        raise ValueError("tau0 must be non-negative")
    need = tau0 + formula_length(f)
    if need >= T:
        raise TrajectoryTooShort(
            f"formula needs time index {need} but the trajectory has {T} steps"
        )


def robustness_trace(f: A.Formula, x, weights: Optional[WeightSpec] = None,
                     predicate_values=None) -> np.ndarray:
    """Robust semantics for every determined time step and agent, shape ``(V, L)``."""
    return RobustEvaluator(x, weights, predicate_values)(f)


def eval_robust_stl(f: A.Formula, x, tau0: int = 0, predicate_values=None) -> float:
    """Robust semantics of an STL formula at ``tau0``; agents are flattened."""
    if f.is_spatial():
        raise ValueError("formula has spatial operators; use eval_robust_strel")
    xs = stl_view(x)
    _check_horizon(f, xs.shape[0], tau0)
    return float(RobustEvaluator(xs, None, predicate_values)(f)[tau0, 0])


def eval_robust_strel(f: A.Formula, x, weights: Optional[WeightSpec], tau0: int = 0,
                      agent: int = 1, predicate_values=None) -> float:
    """Robust semantics of an STREL formula at ``tau0`` for 1-based ``agent``."""
    x = as_trajectory(x)
    if not 1 <= agent <= x.shape[1]:
        raise ValueError(f"agent {agent} out of range 1..{x.shape[1]}")
    _check_horizon(f, x.shape[0], tau0)
    return float(RobustEvaluator(x, weights, predicate_values)(f)[tau0, agent - 1])
