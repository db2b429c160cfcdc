"""Vanilla and distributionally robust conformal quantiles.

The robust quantile protects against test distributions within an
f-divergence ball of radius ``epsilon`` around the calibration distribution.
Total variation has a closed form; any other convex ``f`` goes through a
nested bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

TOL = 1e-9
MAX_ITER = 200
_LEVEL_GUARD = 1e-9


def tv_f(z: float) -> float:
    return 0.5 * abs(z - 1.0)


def kl_f(z: float) -> float:
    return z * math.log(z) if z > 0 else 0.0


def chi2_f(z: float) -> float:
    return (z - 1.0) ** 2


_NAMED = {"tv": tv_f, "kl": kl_f, "chi2": chi2_f}


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DivergenceSpec:
    """An f-divergence ball of radius ``epsilon``.

    Parameters
    ----------
    kind : {"tv", "kl", "chi2", "generic"}
        ``"tv"`` uses the closed form ``g(b) = max(0, b - eps)``. Other kinds use
        the numeric path with the named or supplied ``f``.
    epsilon : float
    f : callable, optional
        Convex function with ``f(1) = 0``; required for ``kind="generic"``.
    closed_form : bool
        Set to False to force the numeric path even for ``"tv"``.
    """

    kind: str = "tv"
    epsilon: float = 0.0
    f: Optional[Callable] = None
    closed_form: bool = True

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a finite non-negative number")
        if self.kind not in _NAMED and self.kind != "generic":
            raise ValueError(f"unknown divergence {self.kind!r}")
        if self.kind == "generic" and self.f is None:
            raise ValueError("generic divergence needs f")

    @property
    def fn(self) -> Callable:
        return self.f if self.f is not None else _NAMED[self.kind]

    @property
    def analytic(self) -> bool:
        return self.kind == "tv" and self.closed_form and self.f is None


def _check_unit(v: float, name: str) -> None:
    if not (0.0 <= v <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _bisect(pred, lo: float, hi: float) -> float:
    """Smallest point in [lo, hi] where the monotone predicate turns true (to TOL)."""
    for _ in range(MAX_ITER):
        if hi - lo <= TOL:
            return hi
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    raise BisectionError("bisection did not converge")


def _recession(f: Callable) -> float:
    # lim_{t->inf} f(t)/t, i.e. the perspective 0 * f(c/0) per unit of c
    r1, r2 = float(f(1e6)) / 1e6, float(f(1e12)) / 1e12
    if r2 > r1 + 1e-6 * max(1.0, abs(r1)):
        return math.inf
    return r2


def _scaled(c: float, rate: float) -> float:
    return 0.0 if c == 0 else c * rate


def _constraint(f: Callable, beta: float, z: float) -> float:
    """``beta f(z/beta) + (1-beta) f((1-z)/(1-beta))`` with perspective limits."""
    if beta <= 0:
        a = _scaled(z, _recession(f))
    else:
        a = beta * float(f(z / beta))
    if beta >= 1:
        b = _scaled(1 - z, _recession(f))
    else:
        b = (1 - beta) * float(f((1 - z) / (1 - beta)))
    return a + b


def g_func(div: DivergenceSpec, beta: float) -> float:
    """Worst-case mass ``g(beta)`` retained under an epsilon-shift."""
    _check_unit(beta, "beta")
    if div.analytic:
        return max(0.0, beta - div.epsilon)
    if div.epsilon == 0:
        return beta
    f = div.fn
    # constraint is convex in z with minimum 0 at z = beta; g is the left root
    if _constraint(f, beta, 0.0) <= div.epsilon:
        return 0.0
    return _bisect(lambda z: _constraint(f, beta, z) <= div.epsilon, 0.0, beta)


def g_inverse(div: DivergenceSpec, tau: float) -> float:
    """``sup{beta in [0,1] : g(beta) <= tau}``."""
    _check_unit(tau, "tau")
    if div.analytic:
        return min(1.0, tau + div.epsilon)
    if div.epsilon == 0:
        return tau
    if g_func(div, 1.0) <= tau:
        return 1.0
    # g is nondecreasing: last beta with g(beta) <= tau
    lo, hi = 0.0, 1.0
    for _ in range(MAX_ITER):
        if hi - lo <= TOL:
            return lo
        mid = 0.5 * (lo + hi)
        if g_func(div, mid) <= tau:
            lo = mid
        else:
            hi = mid
    raise BisectionError("bisection did not converge")


@dataclass(frozen=True)
class QuantileResult:
    """Outcome of a conformal calibration.

    ``index`` is the 1-based order statistic used, or None when the result is
    infinite. ``level`` is the effective empirical level.
    """

    value: float
    index: Optional[int]
    level: float
    feasible: bool
    K: int


def _order_index(K: int, level: float) -> Optional[int]:
    """``ceil(K * level)`` clamped to 1; None if above K."""
    p = math.ceil(K * level - _LEVEL_GUARD)
    p = max(p, 1)
    return p if p <= K else None


def _scores(scores) -> np.ndarray:
    r = np.asarray(scores, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("empty score list")
    if np.any(np.isnan(r)):
        raise ValueError("scores must not be NaN")
    return r


def _pick(r: np.ndarray, level: float) -> QuantileResult:
    K = r.size
    p = _order_index(K, level)
    if p is None:
        return QuantileResult(math.inf, None, level, False, K)
    return QuantileResult(float(np.partition(r, p - 1)[p - 1]), p, level, True, K)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def vanilla_quantile(scores, delta: float) -> QuantileResult:
    """Split-conformal quantile: the ``ceil((K+1)(1-delta))``-th smallest score."""
    _check_delta(delta)
    r = _scores(scores)
    K = r.size
    return _pick(r, (1 + 1 / K) * (1 - delta))


def _feasible(K: int, b: float) -> bool:
    # (1 + 1/K) b <= 1, with the same rounding guard as the order-statistic index
    return (1 + 1 / K) * b <= 1 + _LEVEL_GUARD / K


def robust_levels(K: int, delta: float, div: DivergenceSpec) -> tuple:
    """Return ``(q, delta_n, delta_tilde)``; ``delta_n`` and ``delta_tilde`` are None if q > 1."""
    b = g_inverse(div, 1 - delta)
    q = (1 + 1 / K) * b
    if not _feasible(K, b):
        return q, None, None
    q = min(q, 1.0)
    delta_n = 1 - g_func(div, q)
    delta_tilde = 1 - g_inverse(div, 1 - delta_n)
    return q, delta_n, delta_tilde


def robust_quantile(scores, delta: float, div: DivergenceSpec) -> QuantileResult:
    """Distribution-shift-robust conformal quantile at level ``1 - delta_tilde``."""
    _check_delta(delta)
    r = _scores(scores)
    K = r.size
    q, _, delta_tilde = robust_levels(K, delta, div)
    if delta_tilde is None:
        return QuantileResult(math.inf, None, q, False, K)
    return _pick(r, 1 - delta_tilde)


def min_calibration_size(delta: float, div: DivergenceSpec) -> Optional[int]:
    """Smallest K with a finite robust quantile, or None if no K suffices."""
    _check_delta(delta)
    b = g_inverse(div, 1 - delta)
    if b >= 1:
        return None
    k = max(1, math.ceil(b / (1 - b) - _LEVEL_GUARD))
    # settle floating-point ties with the exact feasibility test used by robust_quantile
    while not _feasible(k, b):
        k += 1
    while k > 1 and _feasible(k - 1, b):
        k -= 1
    return k
