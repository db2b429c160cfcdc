"""Estimating the distribution shift between design-time and deployment scores.

Each score sample is smoothed with a Gaussian kernel density estimate and the
total variation distance ``0.5 * int |p - q|`` is integrated numerically.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rprv.methods import calibration_data, fit_alpha, normalized_scores, ALPHA_FLOOR
from .rprv.problem import ACCURATE, METHODS, MonitorProblem

BANDWIDTH_FLOOR = 1e-6
GRID_POINTS = 4096
_CHUNK = 512


def silverman_bandwidth(samples) -> float:
    """``1.06 * std * m^(-1/5)``, floored at ``BANDWIDTH_FLOOR``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample set")
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return max(1.06 * sd * x.size ** (-0.2), BANDWIDTH_FLOOR)


class GaussianKDE:
    """Gaussian kernel density estimate with a fixed bandwidth.

    Implemented directly (instead of ``scipy.stats.gaussian_kde``) so that
    zero-variance samples degrade to a narrow spike rather than an error.
    """

    def __init__(self, samples, bandwidth: Optional[float] = None):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("empty sample set")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        self.samples = x
        self.bandwidth = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    def __call__(self, grid) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        flat = grid.ravel()
        out = np.empty(flat.size)
        h = self.bandwidth
        norm = 1.0 / (self.samples.size * h * np.sqrt(2 * np.pi))
        for s in range(0, flat.size, _CHUNK):
            z = (flat[s : s + _CHUNK, None] - self.samples[None, :]) / h
            out[s : s + _CHUNK] = np.exp(-0.5 * z * z).sum(axis=1) * norm
        return out.reshape(grid.shape)

    def support(self, pad: float = 3.0) -> tuple:
        return self.samples.min() - pad * self.bandwidth, self.samples.max() + pad * self.bandwidth


def kde_pdf(samples, bandwidth: Optional[float] = None) -> GaussianKDE:
    return GaussianKDE(samples, bandwidth)


def tv_grid(kde_a: GaussianKDE, kde_b: GaussianKDE, grid_points: int = GRID_POINTS) -> np.ndarray:
    pad = 3.0 * max(kde_a.bandwidth, kde_b.bandwidth)
    lo = min(kde_a.samples.min(), kde_b.samples.min()) - pad
    hi = max(kde_a.samples.max(), kde_b.samples.max()) + pad
    return np.linspace(lo, hi, int(grid_points))


def tv_between(samples_a, samples_b, grid_points: int = GRID_POINTS,
               bandwidth: Optional[float] = None) -> float:
    """Total variation distance between the KDEs of two samples, clamped to [0, 1]."""
    ka, kb = GaussianKDE(samples_a, bandwidth), GaussianKDE(samples_b, bandwidth)
    grid = tv_grid(ka, kb, grid_points)
    val = 0.5 * np.trapezoid(np.abs(ka(grid) - kb(grid)), grid)
    return float(min(1.0, max(0.0, val)))


@dataclass
class ShiftEstimate:
    components: dict
    epsilon: float
    bandwidths: dict = field(default_factory=dict)
    grid_points: int = GRID_POINTS

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def method_scores(problem: MonitorProblem, method: str, X, X_hat, alpha=None) -> np.ndarray:
    data = calibration_data(problem, method, X, X_hat)
    return data if method == ACCURATE else normalized_scores(data, alpha)


def estimate_epsilon(problem: MonitorProblem, X_train, X_hat_train, X_test, X_hat_test,
                     X_alpha=None, X_hat_alpha=None, methods: Sequence[str] = METHODS,
                     grid_points: int = GRID_POINTS, alpha_floor: float = ALPHA_FLOOR) -> ShiftEstimate:
    """TV distance between train- and test-pool scores for each method; ``epsilon`` is the max.

    Normalizing constants of the interpretable scores come from the alpha
    set, exactly as in calibration.
    """
    comps, bws = {}, {}
    for m in methods:
        alpha = None
        if m != ACCURATE:
            if X_alpha is None:
                raise ValueError("interpretable scores need an alpha dataset")
            alpha = fit_alpha(calibration_data(problem, m, X_alpha, X_hat_alpha), alpha_floor)
        a = method_scores(problem, m, X_train, X_hat_train, alpha)
        b = method_scores(problem, m, X_test, X_hat_test, alpha)
        comps[m] = tv_between(a, b, grid_points)
        bws[m] = [silverman_bandwidth(a), silverman_bandwidth(b)]
    return ShiftEstimate(comps, max(comps.values()), bws, int(grid_points))
