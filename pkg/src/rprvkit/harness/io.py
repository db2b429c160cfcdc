"""Dataset and weight files, splits and weight-spec strings.

Trajectory CSV: ``trial,time,agent,x0,...,x{n-1}`` with 0-based contiguous
times and 1-based contiguous agents. Explicit weight CSV:
``trial,time,agent_a,agent_b,weight`` (undirected; unlisted pairs have no edge).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..semantics.graph import (
    AdjacencyWeights,
    ExplicitWeights,
    ProximityWeights,
    StarWeights,
    WeightSpec,
)


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """Trajectories ``(M, T, L, n)`` with their trial ids."""

    X: np.ndarray
    trials: list

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 4:
            raise DatasetError("trajectories must have shape (M, T, L, n)")
        self.trials = list(self.trials)
        if len(self.trials) != self.X.shape[0]:
            raise DatasetError("one trial id per trajectory")
        if len(set(self.trials)) != len(self.trials):
            raise DatasetError("duplicate trial ids")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], [self.trials[i] for i in idx])


def trajectories_frame(X, trials: Optional[Sequence] = None) -> pd.DataFrame:
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X[:, :, None, :]
    M, T, L, n = X.shape
    trials = list(range(M)) if trials is None else list(trials)
    idx = np.stack(np.meshgrid(np.arange(M), np.arange(T), np.arange(L), indexing="ij"), -1).reshape(-1, 3)
    df = pd.DataFrame({
        "trial": np.asarray(trials, dtype=object)[idx[:, 0]],
        "time": idx[:, 1],
        "agent": idx[:, 2] + 1,
    })
    vals = X.reshape(-1, n)
    for j in range(n):
        df[f"x{j}"] = vals[:, j]
    return df


def save_trajectories(path, X, trials: Optional[Sequence] = None) -> None:
    trajectories_frame(X, trials).to_csv(path, index=False, float_format="%.17g")


def _state_columns(df: pd.DataFrame) -> list:
    cols = [c for c in df.columns if c not in ("trial", "time", "agent")]
    expect = [f"x{j}" for j in range(len(cols))]
    if not cols or cols != expect:
        raise DatasetError(f"state columns must be x0..x{{n-1}}, got {cols}")
    return cols


def frame_to_dataset(df: pd.DataFrame) -> Dataset:
    missing = {"trial", "time", "agent"} - set(df.columns)
    if missing:
        raise DatasetError(f"missing columns: {sorted(missing)}")
    cols = _state_columns(df)
    try:
        times = pd.to_numeric(df["time"], errors="raise")
        agents = pd.to_numeric(df["agent"], errors="raise")
        vals = df[cols].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DatasetError(f"malformed row: non-numeric value ({exc})") from None
    if np.any(np.isnan(vals)):
        bad = int(np.flatnonzero(np.isnan(vals).any(axis=1))[0])
        raise DatasetError(f"malformed row {bad + 2}: missing state value")
    if np.any(times != np.floor(times)) or np.any(agents != np.floor(agents)):
        raise DatasetError("time and agent must be integers")
    work = pd.DataFrame({"trial": df["trial"].astype(str), "time": times.astype(int),
                         "agent": agents.astype(int)})
    dup = work.duplicated()
    if dup.any():
        r = work[dup].iloc[0]
        raise DatasetError(f"duplicate row for trial={r.trial} time={r.time} agent={r.agent}")
    trials = list(dict.fromkeys(work["trial"]))
    T = int(work["time"].max()) + 1
    L = int(work["agent"].max())
    n = len(cols)
    X = np.full((len(trials), T, L, n), np.nan)
    pos = {tr: i for i, tr in enumerate(trials)}
    ti = work["trial"].map(pos).to_numpy()
    tt = work["time"].to_numpy()
    aa = work["agent"].to_numpy() - 1
    if tt.min() < 0 or aa.min() < 0:
        raise DatasetError("times start at 0 and agents at 1")
    X[ti, tt, aa] = vals
    holes = np.isnan(X).any(axis=(2, 3))
    if holes.any():
        i, k = np.argwhere(holes)[0]
        raise DatasetError(f"trial {trials[i]}: non-contiguous times or missing agents at time {k}")
    return Dataset(X, trials)


def load_trajectories(path) -> Dataset:
    try:
        df = pd.read_csv(path, dtype={"trial": str}, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from None
    return frame_to_dataset(df)


def load_weights(path, n_agents: Optional[int] = None) -> dict:
    """Explicit per-trial weights: ``{trial: ExplicitWeights}``."""
    df = pd.read_csv(path, dtype={"trial": str}, float_precision="round_trip")
    need = ["trial", "time", "agent_a", "agent_b", "weight"]
    if list(df.columns) != need:
        raise DatasetError(f"weight file columns must be {need}")
    if df[need[1:]].isna().any().any():
        raise DatasetError("malformed weight row")
    if df.duplicated(["trial", "time", "agent_a", "agent_b"]).any():
        raise DatasetError("duplicate weight rows")
    out = {}
    for trial, g in df.groupby("trial", sort=False):
        T = int(g["time"].max()) + 1
        L = n_agents or int(max(g["agent_a"].max(), g["agent_b"].max()))
        m = np.full((T, L, L), np.inf)
        for tau, a, b, w in g[need[1:]].itertuples(index=False):
            a, b = int(a) - 1, int(b) - 1
            if not (0 <= a < L and 0 <= b < L):
                raise DatasetError(f"agent out of range in weight row for trial {trial}")
            m[int(tau), a, b] = m[int(tau), b, a] = float(w)
        out[trial] = ExplicitWeights(m)
    return out


def save_weights(path, matrices: dict) -> None:
    rows = []
    for trial, m in matrices.items():
        m = np.asarray(m, dtype=float)
        for tau in range(m.shape[0]):
            for a in range(m.shape[1]):
                for b in range(a + 1, m.shape[2]):
                    if np.isfinite(m[tau, a, b]):
                        rows.append((trial, tau, a + 1, b + 1, m[tau, a, b]))
    pd.DataFrame(rows, columns=["trial", "time", "agent_a", "agent_b", "weight"]).to_csv(
        path, index=False, float_format="%.17g")


def parse_weights(spec: Optional[str]) -> Optional[WeightSpec]:
    """Weight spec strings.

    ``proximity:R``, ``star:HUB``, ``edges:1-2,2-3`` or ``complete``, each
    optionally followed by ``:scaled=C`` (weight ``C * distance``) and
    ``:dims=0,1,2`` (position components, default all).
    """
    if spec is None or spec == "":
        return None
    parts = spec.split(":")
    kind, rest = parts[0], parts[1:]
    opts, args = {}, []
    for p in rest:
        if "=" in p:
            k, v = p.split("=", 1)
            opts[k] = v
        else:
            args.append(p)
    unknown = set(opts) - {"scaled", "dims"}
    if unknown:
        raise ValueError(f"unknown weight option(s) {sorted(unknown)}")
    scale = float(opts["scaled"]) if "scaled" in opts else None
    dims = tuple(int(d) for d in opts["dims"].split(",")) if "dims" in opts else None
    try:
        if kind == "proximity" and len(args) == 1:
            return ProximityWeights(float(args[0]), scale, dims)
        if kind == "star" and len(args) == 1:
            return StarWeights(int(args[0]), scale, dims)
        if kind == "edges" and len(args) == 1:
            edges = tuple(tuple(int(v) for v in e.split("-")) for e in args[0].split(","))
            if any(len(e) != 2 for e in edges):
                raise ValueError
            return AdjacencyWeights(edges, scale, dims)
        if kind == "complete" and not args:
            return ProximityWeights(np.inf, scale, dims)
    except ValueError:
        pass
    raise ValueError(f"bad weight spec {spec!r}")


def split_indices(n: int, sizes: dict, seed=None) -> dict:
    """Disjoint random index sets of the requested sizes (in insertion order)."""
    total = sum(sizes.values())
    if any(v < 0 for v in sizes.values()):
        raise ValueError("split sizes must be non-negative")
    if total > n:
        raise ValueError(f"splits need {total} trajectories, only {n} available")
    perm = np.random.default_rng(seed).permutation(n)
    out, start = {}, 0
    for name, size in sizes.items():
        out[name] = np.sort(perm[start : start + size])
        start += size
    return out


def save_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
