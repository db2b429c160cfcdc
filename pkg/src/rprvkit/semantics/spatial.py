"""Reach and escape on one graph snapshot.

Robust versions follow the classic queue/fixpoint algorithms over per-agent
value vectors ``s1`` (left operand) and ``s2`` (right operand). Boolean
versions are independent forward searches used as a cross-check.
"""
from __future__ import annotations

import math

import numpy as np

MAX_ROUNDS = 100_000


class FixpointError(RuntimeError):
    """An iteration cap was hit; indicates a bug, never expected in practice."""


def _neighbors(w: np.ndarray) -> list:
    return [np.flatnonzero(np.isfinite(w[u])) for u in range(w.shape[0])]


def _dominated(history: list, d: float, v: float, d1: float) -> bool:
    for d0, v0 in history:
        if v0 >= v and (d0 == d or d1 <= d0 <= d):
            return True
    return False


def bounded_reach(w: np.ndarray, s1: np.ndarray, s2: np.ndarray, d1: float, d2: float) -> np.ndarray:
    """Robust reach with a finite upper distance bound.

    Queue entries ``(l, v, d)`` are propagated backwards along edges. An entry
    is dropped when an earlier entry at the same node has a value at least as
    large and a distance that is either equal or already inside ``[d1, d]``;
    every continuation of the dropped entry is then matched by one of the
    earlier entry, so the result is unchanged and zero-weight cycles terminate.
    """
    L = len(s1)
    nbrs = _neighbors(w)
    s = s2.astype(float).copy() if d1 == 0 else np.full(L, -np.inf)
    history = [[(0.0, float(s2[l]))] for l in range(L)]
    Q = {(l, 0.0): float(s2[l]) for l in range(L)}
    rounds = 0
    while Q:
        rounds += 1
        if rounds > MAX_ROUNDS:
            raise FixpointError("bounded reach did not terminate")
        nxt: dict = {}
        for (l, d), v in sorted(Q.items()):
            for lp in nbrs[l]:
                vp = min(v, s1[lp])
                dp = d + w[lp, l]
                if d1 <= dp <= d2 and vp > s[lp]:
                    s[lp] = vp
                # <= so that zero-weight edges at exactly d2 are still followed
                if dp <= d2:
                    key = (int(lp), float(dp))
                    nxt[key] = max(vp, nxt.get(key, -math.inf))
        Q = {}
        for (l, d), v in sorted(nxt.items()):
            if not _dominated(history[l], d, v, d1):
                history[l].append((d, v))
                Q[(l, d)] = v
    return s


def unbounded_reach(w: np.ndarray, s1: np.ndarray, s2: np.ndarray, d1: float) -> np.ndarray:
    """Robust reach with ``d2 = inf``."""
    L = len(s1)
    nbrs = _neighbors(w)
    if d1 == 0:
        s = s2.astype(float).copy()
    else:
        finite = w[np.isfinite(w)]
        if finite.size == 0:
            return np.full(L, -np.inf)
        s = bounded_reach(w, s1, s2, d1, d1 + float(finite.max()))
    frontier = list(range(L))
    rounds = 0
    while frontier:
        rounds += 1
        if rounds > MAX_ROUNDS:
            raise FixpointError("unbounded reach did not terminate")
        changed = set()
        for l in frontier:
            for lp in nbrs[l]:
                vp = max(min(s[l], s1[lp]), s[lp])
                if vp != s[lp]:
                    s[lp] = vp
                    changed.add(int(lp))
        frontier = sorted(changed)
    return s


def somewhere(D: np.ndarray, s2: np.ndarray, d2: float) -> np.ndarray:
    """Reach with ``s1 = +inf`` and ``d1 = 0``: best ``s2`` within min-distance ``d2``."""
    # unreachable pairs have D = inf and stay excluded when d2 = inf
    return np.where((D <= d2) & np.isfinite(D), s2[None, :], -np.inf).max(axis=1)


def reach(w: np.ndarray, s1: np.ndarray, s2: np.ndarray, d1: float, d2: float) -> np.ndarray:
    if math.isinf(d2):
        return unbounded_reach(w, s1, s2, d1)
    return bounded_reach(w, s1, s2, d1, d2)


def escape(w: np.ndarray, D: np.ndarray, s1: np.ndarray, d1: float, d2: float) -> np.ndarray:
    """Robust escape: widest path of ``s1`` values to any agent at min-distance in ``[d1, d2]``."""
    L = len(s1)
    adj = np.isfinite(w)
    e = np.full((L, L), -np.inf)
    e[np.arange(L), np.arange(L)] = s1
    for _ in range(L + 1):
        cand = np.where(adj[:, :, None], e[None, :, :], -np.inf).max(axis=1)
        new = np.maximum(e, np.minimum(s1[:, None], cand))
        if np.array_equal(new, e):
            break
        e = new
    else:
        raise FixpointError("escape did not terminate")
    mask = (D >= d1) & (D <= d2)
    return np.where(mask, e, -np.inf).max(axis=1)


def bool_reach(w: np.ndarray, b1: np.ndarray, b2: np.ndarray, d1: float, d2: float) -> np.ndarray:
    """Boolean reach by forward search from every agent."""
    L = len(b1)
    nbrs = _neighbors(w)
    bounded = not math.isinf(d2)
    out = np.zeros(L, dtype=bool)
    for start in range(L):
        seen = {(start, 0.0)}
        stack = [(start, 0.0)]
        while stack:
            u, d = stack.pop()
            if d1 <= d <= d2 and b2[u]:
                out[start] = True
                break
            if not b1[u]:
                continue
            for v in nbrs[u]:
                nd = d + w[u, v]
                if bounded and nd > d2:
                    continue
                if not bounded:
                    nd = min(nd, d1)
                key = (int(v), float(nd))
                if key not in seen:
                    seen.add(key)
                    stack.append(key)
    return out


def bool_escape(w: np.ndarray, D: np.ndarray, b1: np.ndarray, d1: float, d2: float) -> np.ndarray:
    """Boolean escape: some agent at min-distance in ``[d1, d2]`` is reachable through ``b1`` agents."""
    L = len(b1)
    nbrs = _neighbors(w)
    out = np.zeros(L, dtype=bool)
    for start in range(L):
        if not b1[start]:
            continue
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if b1[v] and v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        out[start] = any(d1 <= D[start, v] <= d2 for v in seen)
    return out
