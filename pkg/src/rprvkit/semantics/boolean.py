"""Boolean semantics, implemented independently of the robust evaluator."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..logic import ast as A
from ..logic.transform import desugar_surround
from .graph import WeightSpec, graph_at
from .robust import _check_horizon, as_trajectory, stl_view
from .spatial import bool_escape, bool_reach


class BooleanEvaluator:
    def __init__(self, x, weights: Optional[WeightSpec] = None):
        self.x = as_trajectory(x)
        self.weights = weights
        self._graphs: dict = {}

    def graph(self, tau):
        if tau not in self._graphs:
            if self.weights is None:
                raise ValueError("spatial operators require a weight specification")
            self._graphs[tau] = graph_at(self.weights, self.x, tau)
        return self._graphs[tau]

    def __call__(self, node: A.Formula) -> np.ndarray:
        T, L = self.x.shape[:2]
        if isinstance(node, A.TrueF):
            return np.ones((T, L), dtype=bool)
        if isinstance(node, A.FalseF):
            return np.zeros((T, L), dtype=bool)
        if isinstance(node, A.Predicate):
            return node.comparison.evaluate(self.x) >= 0
        if isinstance(node, A.Not):
            return ~self(node.arg)
        if isinstance(node, (A.And, A.Or)):
            a, b = self(node.left), self(node.right)
            V = min(len(a), len(b))
            return (a[:V] & b[:V]) if isinstance(node, A.And) else (a[:V] | b[:V])
        if isinstance(node, (A.Until, A.Eventually, A.Always)):
            if isinstance(node, A.Until):
                b1, b2 = self(node.left), self(node.right)
            else:
                b2 = self(node.arg)
                b1 = np.ones_like(b2)
                if isinstance(node, A.Always):
                    b2 = ~b2
            lo, hi = node.interval.first, node.interval.last
            V = max(0, min(len(b1), len(b2)) - hi)
            out = np.zeros((V, L), dtype=bool)
            for tau in range(V):
                for l in range(L):
                    out[tau, l] = any(
                        b2[tau + k, l] and all(b1[tau + j, l] for j in range(1, k))
                        for k in range(lo, hi + 1)
                    )
            return ~out if isinstance(node, A.Always) else out
        if isinstance(node, (A.Reach, A.Somewhere, A.Everywhere)):
            iv = node.interval
            if isinstance(node, A.Reach):
                b1, b2 = self(node.left), self(node.right)
            else:
                b2 = self(node.arg)
                if isinstance(node, A.Everywhere):
                    b2 = ~b2
                b1 = np.ones_like(b2)
            V = min(len(b1), len(b2))
            out = np.zeros((V, L), dtype=bool)
            for tau in range(V):
                g = self.graph(tau)
                out[tau] = bool_reach(g.weights, b1[tau], b2[tau], iv.lo, iv.hi)
            return ~out if isinstance(node, A.Everywhere) else out
        if isinstance(node, A.Escape):
            b1 = self(node.arg)
            out = np.zeros(b1.shape, dtype=bool)
            for tau in range(len(b1)):
                g = self.graph(tau)
                out[tau] = bool_escape(g.weights, g.distances, b1[tau], node.interval.lo, node.interval.hi)
            return out
        if isinstance(node, A.Surround):
            return self(desugar_surround(node))
        raise TypeError(f"unsupported formula node {type(node).__name__}")


def eval_bool_stl(f: A.Formula, x, tau0: int = 0) -> bool:
    if f.is_spatial():
        raise ValueError("formula has spatial operators; use eval_bool_strel")
    xs = stl_view(x)
    _check_horizon(f, xs.shape[0], tau0)
    return bool(BooleanEvaluator(xs)(f)[tau0, 0])


def eval_bool_strel(f: A.Formula, x, weights: Optional[WeightSpec], tau0: int = 0, agent: int = 1) -> bool:
    x = as_trajectory(x)
    if not 1 <= agent <= x.shape[1]:
        raise ValueError(f"agent {agent} out of range 1..{x.shape[1]}")
    _check_horizon(f, x.shape[0], tau0)
    return bool(BooleanEvaluator(x, weights)(f)[tau0, agent - 1])
