"""State-dependent weighted agent graphs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class WeightSpec:
    """Maps a trajectory and a time index to an ``L x L`` weight matrix.

    Absent edges and the diagonal carry ``+inf``.
    """

    def matrix(self, x: np.ndarray, tau: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


def _positions(x: np.ndarray, tau: int, dims: Optional[Sequence[int]]) -> np.ndarray:
    p = x[tau]
    return p if dims is None else p[:, list(dims)]


def _pairwise(p: np.ndarray) -> np.ndarray:
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def _apply_rule(dist: np.ndarray, mask: np.ndarray, scale: Optional[float]) -> np.ndarray:
    w = np.where(mask, 1.0 if scale is None else scale * dist, np.inf)
    np.fill_diagonal(w, np.inf)
    return w


@dataclass(frozen=True)
class ProximityWeights(WeightSpec):
    """Edge between agents at Euclidean distance ``<= threshold``.

    Weight is 1, or ``scale * distance`` when ``scale`` is set.
    """

    threshold: float
    scale: Optional[float] = None
    position_dims: Optional[tuple] = None

    def matrix(self, x, tau):
        d = _pairwise(_positions(x, tau, self.position_dims))
        return _apply_rule(d, d <= self.threshold, self.scale)

    def describe(self):
        return f"proximity:{self.threshold}" + ("" if self.scale is None else f":scaled={self.scale}")


@dataclass(frozen=True)
class AdjacencyWeights(WeightSpec):
    """Fixed undirected edge list over 1-based agent labels."""

    edges: tuple
    scale: Optional[float] = None
    position_dims: Optional[tuple] = None

    def matrix(self, x, tau):
        L = x.shape[1]
        mask = np.zeros((L, L), dtype=bool)
        for a, b in self.edges:
            if not (1 <= a <= L and 1 <= b <= L):
                raise ValueError(f"edge ({a},{b}) out of range for {L} agents")
            mask[a - 1, b - 1] = mask[b - 1, a - 1] = True
        d = _pairwise(_positions(x, tau, self.position_dims)) if self.scale is not None else None
        return _apply_rule(d if d is not None else np.zeros((L, L)), mask, self.scale)

    def describe(self):
        es = ",".join(f"{a}-{b}" for a, b in self.edges)
        return f"edges:{es}" + ("" if self.scale is None else f":scaled={self.scale}")


@dataclass(frozen=True)
class StarWeights(WeightSpec):
    """Star topology around ``hub`` (1-based)."""

    hub: int
    scale: Optional[float] = None
    position_dims: Optional[tuple] = None

    def matrix(self, x, tau):
        L = x.shape[1]
        if not 1 <= self.hub <= L:
            raise ValueError(f"hub {self.hub} out of range for {L} agents")
        edges = tuple((self.hub, b) for b in range(1, L + 1) if b != self.hub)
        return AdjacencyWeights(edges, self.scale, self.position_dims).matrix(x, tau)

    def describe(self):
        return f"star:{self.hub}" + ("" if self.scale is None else f":scaled={self.scale}")


@dataclass(frozen=True, eq=False)
class ExplicitWeights(WeightSpec):
    """Per-time weight matrices, shape ``(T, L, L)``."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValueError("explicit weights must have shape (T, L, L)")
        if np.any(np.isnan(m)) or np.any(m < 0):
            raise ValueError("explicit weights must be non-negative")
        if not np.array_equal(m, m.transpose(0, 2, 1)):
            raise ValueError("explicit weights must be symmetric")
        m = m.copy()
        idx = np.arange(m.shape[1])
        m[:, idx, idx] = np.inf
        object.__setattr__(self, "matrices", m)

    def matrix(self, x, tau):
        if tau >= self.matrices.shape[0]:
            raise ValueError(f"no explicit weights for time {tau}")
        if self.matrices.shape[1] != x.shape[1]:
            raise ValueError("explicit weights do not match the agent count")
        return self.matrices[tau]

    def describe(self):
        return "explicit"


def min_distance(w: np.ndarray) -> np.ndarray:
    """All-pairs minimum accumulated weight (Floyd-Warshall); ``D[l, l] = 0``."""
    D = np.array(w, dtype=float)
    np.fill_diagonal(D, np.minimum(np.diag(D), 0.0))
    for k in range(D.shape[0]):
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return D


@dataclass(frozen=True, eq=False)
class GraphSnapshot:
    tau: int
    weights: np.ndarray
    distances: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    def neighbors(self, l: int) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.weights[l]))


def graph_at(w: WeightSpec, x: np.ndarray, tau: int) -> GraphSnapshot:
    """Materialize the graph at time ``tau`` of a ``(T, L, n)`` trajectory."""
    x = np.asarray(x, dtype=float)
    if not 0 <= tau < x.shape[0]:
        raise ValueError(f"time {tau} outside trajectory of length {x.shape[0]}")
    W = np.asarray(w.matrix(x, tau), dtype=float)
    if np.any(W < 0) or np.any(np.isnan(W)):
        raise ValueError("edge weights must be non-negative")
    return GraphSnapshot(tau, W, min_distance(W))
