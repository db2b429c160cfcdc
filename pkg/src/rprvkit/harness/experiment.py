"""Repeated-trial coverage experiments.

Pools are generated (or loaded) once: predictor training, alpha set and
calibration pool from the design distribution; the test pool from the
deployment distribution. Every pool trajectory is predicted and scored once.
Each repetition then draws ``K`` calibration and ``M`` test trajectories
without replacement, calibrates every method with the requested ``epsilon``
and with ``epsilon = 0``, and records ``1[rho(X) >= rho_star]`` per test
trajectory.
"""
from __future__ import annotations

import gc
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from ..conformal import DivergenceSpec
from ..predictors import ARPredictor, ConstantVelocityPredictor, TrajectoryPredictor
from ..rprv.api import predict_full
from ..rprv.methods import (
    ALPHA_FLOOR,
    _future,
    _trim,
    artifact_from_scores,
    calibration_data,
    fit_alpha,
    normalized_scores,
    verify,
)
from ..rprv.problem import ACCURATE, METHODS, MonitorProblem
from ..shift import estimate_epsilon
from . import io, systems

ROBUST, BASELINE = "robust", "baseline"
VARIANTS = (ROBUST, BASELINE)
HIST_BINS = np.linspace(0.0, 1.0, 21)


@dataclass
class ExperimentConfig:
    """Everything that determines a coverage experiment.

    ``epsilon`` is a number or ``"estimate"`` (estimated from separate
    shift pools drawn from both distributions). ``train_params`` and
    ``test_params`` parametrize the design and deployment distributions
    (``sigma`` for noisy-reference, ``speed`` for swarm-lite). For
    ``system="files"``, ``files`` maps ``"train"`` and ``"test"`` to
    trajectory CSV paths.
    """

    system: str = "noisy-reference"
    formula: Optional[str] = None
    dialect: Optional[str] = None
    methods: tuple = METHODS
    delta: float = 0.2
    epsilon: Union[float, str] = 0.0
    divergence: str = "tv"
    K: int = 500
    M: int = 100
    R: int = 50
    t: Optional[int] = None
    tau0: int = 0
    agent: int = 1
    predictor: Optional[str] = None
    seed: int = 0
    n_predictor_train: int = 500
    n_alpha: int = 200
    n_calibration: int = 1000
    n_test: int = 500
    n_shift: int = 500
    train_params: dict = field(default_factory=dict)
    test_params: dict = field(default_factory=dict)
    n_agents: int = 3
    weights: Optional[str] = None
    ball_norm: str = "2"
    alpha_floor: float = ALPHA_FLOOR
    files: Optional[dict] = None
    timing_trials: int = 40
    timing_repeats: int = 5

    def __post_init__(self):
        self.methods = tuple(self.methods)
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.system not in ("noisy-reference", "swarm-lite", "files"):
            raise ValueError(f"unknown system {self.system!r}")
        if self.R < 1:
            raise ValueError("need at least one repetition")
        if self.K < 1 or self.M < 1:
            raise ValueError("K and M must be positive")
        if self.system != "files":
            if self.K > self.n_calibration:
                raise ValueError("K exceeds the calibration pool")
            if self.M > self.n_test:
                raise ValueError("M exceeds the test pool")
        if any(m != ACCURATE for m in self.methods) and self.n_alpha < 1:
            raise ValueError("interpretable methods need an alpha set")
        if not (isinstance(self.epsilon, str) and self.epsilon == "estimate"):
            self.epsilon = float(self.epsilon)
            if self.epsilon < 0:
                raise ValueError("epsilon must be non-negative")
        defaults = SYSTEM_DEFAULTS.get(self.system, {})
        for key, val in defaults.items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        if self.system == "noisy-reference":
            self.train_params = {"sigma": 3.0, **self.train_params}
            self.test_params = {"sigma": 3.0, **self.test_params}
        elif self.system == "swarm-lite":
            self.train_params = {"speed": 6.0, **self.train_params}
            self.test_params = {"speed": 6.0, **self.test_params}
            if self.formula is None:
                self.formula = systems.swarm_formula()
        if self.formula is None or self.t is None:
            raise ValueError("formula and t are required")
        if self.dialect is None:
            self.dialect = "strel" if self.weights else "stl"
        if self.predictor is None:
            self.predictor = "ar:5"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


SYSTEM_DEFAULTS = {
    "noisy-reference": {"formula": systems.NOISY_REFERENCE_FORMULA, "dialect": "stl",
                        "t": 100, "predictor": "ar:5"},
    "swarm-lite": {"dialect": "strel", "t": 50, "predictor": "dar:10",
                   "weights": "star:2:scaled=0.2:dims=0,1,2"},
}


def make_predictor_from_spec(spec: str) -> TrajectoryPredictor:
    """``"cv"``, ``"cv:<window>"``, ``"ar:<order>"`` or ``"dar:<order>"``.

    ``dar`` is an autoregression on first differences without intercept.
    """
    kind, _, arg = spec.partition(":")
    if kind == "cv":
        return ConstantVelocityPredictor(window=int(arg) if arg else 1)
    if kind == "ar":
        return ARPredictor(order=int(arg) if arg else 2)
    if kind == "dar":
        return ARPredictor(order=int(arg) if arg else 2, difference=True, fit_intercept=False)
    raise ValueError(f"unknown predictor spec {spec!r}")


@dataclass
class CoverageReport:
    """Per-verdict rows, per-repetition coverage, summary, timing and diagnostics.

    Everything except ``timing`` is a deterministic function of the config.
    """

    config: dict
    epsilon: float
    rows: pd.DataFrame
    repetitions: pd.DataFrame
    summary: dict
    timing: dict
    shift: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)

    def coverage(self, method: str, variant: str = ROBUST) -> np.ndarray:
        r = self.repetitions
        sel = r[(r.method == method) & (r.variant == variant)].sort_values("rep")
        return sel["coverage"].to_numpy()

    def mean_coverage(self, method: str, variant: str = ROBUST) -> float:
        return float(self.coverage(method, variant).mean())

    def rho_star(self, method: str, variant: str = ROBUST) -> np.ndarray:
        r = self.rows
        return r[(r.method == method) & (r.variant == variant)]["rho_star"].to_numpy()

    def summary_json(self) -> str:
        body = {"config": self.config, "epsilon": self.epsilon, "summary": self.summary,
                "shift": self.shift, "diagnostics": self.diagnostics}
        return json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self, outdir) -> dict:
        io.ensure_dir(outdir)
        paths = {k: f"{outdir}/{k}" for k in ("rows.csv", "repetitions.csv", "summary.json", "timing.json")}
        self.rows.to_csv(paths["rows.csv"], index=False, float_format="%.17g")
        self.repetitions.to_csv(paths["repetitions.csv"], index=False, float_format="%.17g")
        with open(paths["summary.json"], "w") as fh:
            fh.write(self.summary_json())
        io.save_json(paths["timing.json"], self.timing)
        return paths


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _finite(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


# ---------------------------------------------------------------- pools

def _generate(cfg: ExperimentConfig, params: dict, count: int, seed) -> np.ndarray:
    if count == 0:
        return None
    if cfg.system == "noisy-reference":
        return systems.generate_noisy_reference(sigma=params["sigma"], count=count, seed=seed,
                                                base=params.get("base"))
    extra = {k: v for k, v in params.items() if k != "speed"}
    return systems.generate_swarm_lite(cfg.n_agents, params["speed"], count, seed, **extra)


def build_pools(cfg: ExperimentConfig, need_shift: bool) -> dict:
    """Named, pairwise-disjoint datasets."""
    if cfg.system == "files":
        if not cfg.files or "train" not in cfg.files or "test" not in cfg.files:
            raise ValueError("files system needs 'train' and 'test' paths")
        train = io.load_trajectories(cfg.files["train"])
        test = io.load_trajectories(cfg.files["test"])
        ss = np.random.SeedSequence(cfg.seed).spawn(2)
        sizes = {"predictor_train": cfg.n_predictor_train, "alpha": cfg.n_alpha,
                 "calibration": len(train) - cfg.n_predictor_train - cfg.n_alpha}
        if sizes["calibration"] < cfg.K:
            raise ValueError("not enough design trajectories for the calibration pool")
        split = io.split_indices(len(train), sizes, ss[0])
        pools = {k: train.subset(v) for k, v in split.items()}
        if need_shift:
            # no separate shift pools on files: compare calibration and test pools
            pools["shift_train"] = pools["calibration"]
        pools["test"] = test
        if need_shift:
            pools["shift_test"] = test
        if len(test) < cfg.M:
            raise ValueError("M exceeds the test pool")
        return pools
    names = [("predictor_train", cfg.train_params, cfg.n_predictor_train),
             ("alpha", cfg.train_params, cfg.n_alpha),
             ("calibration", cfg.train_params, cfg.n_calibration),
             ("test", cfg.test_params, cfg.n_test)]
    if need_shift:
        names += [("shift_train", cfg.train_params, cfg.n_shift),
                  ("shift_test", cfg.test_params, cfg.n_shift)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(6)
    pools = {}
    for (name, params, count), s in zip(names, seeds):
        X = _generate(cfg, params, count, s)
        if X is not None:
            pools[name] = io.Dataset(X, [f"{name}-{i:05d}" for i in range(count)])
    return pools


def _rep_seeds(cfg: ExperimentConfig) -> list:
    return np.random.SeedSequence([cfg.seed, 1]).spawn(cfg.R)


# ---------------------------------------------------------------- caches

@dataclass
class _CalibCache:
    data: dict       # method -> raw per-trajectory data
    seconds: dict    # method -> per-trajectory compute time
    alpha: dict
    alpha_seconds: dict


@dataclass
class _TestCache:
    rho_true: np.ndarray
    rho_hat: np.ndarray
    X_hat: np.ndarray
    graphs_hat: list
    table_true: Optional[list]
    table_hat: Optional[list]
    mismatch: Optional[dict] = None


def _score_pool(problem, methods, X, Xh) -> tuple:
    data = {m: [] for m in methods}
    secs = {m: np.zeros(len(X)) for m in methods}
    for i in range(len(X)):
        for m in methods:
            t0 = time.perf_counter()
            d = calibration_data(problem, m, X[i : i + 1], Xh[i : i + 1])[0]
            secs[m][i] = time.perf_counter() - t0
            data[m].append(d)
    return {m: np.asarray(v, dtype=float) for m, v in data.items()}, secs


def _calib_cache(problem, cfg, pools, hats) -> _CalibCache:
    data, secs = _score_pool(problem, cfg.methods, pools["calibration"].X, hats["calibration"])
    alpha, alpha_secs = {}, {}
    for m in cfg.methods:
        if m == ACCURATE:
            continue
        t0 = time.perf_counter()
        errs = calibration_data(problem, m, pools["alpha"].X, hats["alpha"])
        alpha[m] = fit_alpha(errs, cfg.alpha_floor)
        alpha_secs[m] = time.perf_counter() - t0
    return _CalibCache(data, secs, alpha, alpha_secs)


def _graph_mismatch(problem, g_true: dict, g_hat: dict) -> tuple:
    fut = range(problem.t + 1, problem.t + problem.H + 1)
    diff_edges, total, werr = 0, 0, []
    for tau in fut:
        if tau not in g_true or tau not in g_hat:
            continue
        a, b = g_true[tau].weights, g_hat[tau].weights
        total += 1
        fa, fb = np.isfinite(a), np.isfinite(b)
        if not np.array_equal(fa, fb):
            diff_edges += 1
        both = fa & fb
        if both.any():
            werr.append(np.abs(a[both] - b[both]).mean())
    return diff_edges, total, (float(np.mean(werr)) if werr else 0.0)


def _test_cache(problem, cfg, X, Xh) -> _TestCache:
    interp = any(m != ACCURATE for m in cfg.methods)
    n = len(X)
    rho_true, rho_hat = np.empty(n), np.empty(n)
    graphs, tt, th = [], [] if interp else None, [] if interp else None
    mism = {"steps_with_edge_change": 0, "steps": 0, "weight_error": []}
    for i in range(n):
        xv = _trim(problem, problem.view(X[i]))
        xhv = _trim(problem, problem.view(Xh[i]))
        g_true, g_hat = {}, {}
        rho_true[i] = problem.robustness_view(xv, graphs=g_true)
        rho_hat[i] = problem.robustness_view(xhv, graphs=g_hat)
        graphs.append(g_hat)
        if interp:
            tt.append(problem.predicate_table(xv))
            th.append(problem.predicate_table(xhv))
        if problem.spatial:
            d, tot, w = _graph_mismatch(problem, g_true, g_hat)
            mism["steps_with_edge_change"] += d
            mism["steps"] += tot
            mism["weight_error"].append(w)
    mismatch = None
    if problem.spatial:
        steps = max(mism["steps"], 1)
        mismatch = {
            "edge_set_mismatch_rate": mism["steps_with_edge_change"] / steps,
            "mean_abs_weight_error": float(np.mean(mism["weight_error"])),
        }
    return _TestCache(rho_true, rho_hat, Xh, graphs, tt, th, mismatch)


# ---------------------------------------------------------------- runs

def _scores(cache: _CalibCache, method: str, idx) -> np.ndarray:
    d = cache.data[method][idx]
    return d if method == ACCURATE else normalized_scores(d, cache.alpha[method])


def _verdicts(problem, art, test: _TestCache, idx) -> tuple:
    """``rho_star`` and joint predicate coverage for test indices ``idx``."""
    rho = np.empty(len(idx))
    joint = np.full(len(idx), np.nan)
    if art.method == ACCURATE:
        rho[:] = -np.inf if not art.feasible else test.rho_hat[idx] - art.C
        return rho, joint
    fut = _future(problem)
    for k, i in enumerate(idx):
        v = verify(problem, art, test.X_hat[i], graphs=test.graphs_hat[i], table_hat=test.table_hat[i])
        rho[k] = v.rho_star
        agents = problem.agents(test.table_true[i].shape[2])
        truth = test.table_true[i][:, fut][:, :, agents]
        joint[k] = float(np.all(truth >= v.bounds))
    return rho, joint


def _timing_pass(problem, cfg, artifacts: dict, test: _TestCache) -> dict:
    """Uncached per-verdict times (best of ``timing_repeats``), averaged over trajectories.

    Each round runs every method once in a seeded random order, and garbage collection
    is paused while timing, as ``timeit`` does.
    """
    n = min(cfg.timing_trials, len(test.X_hat))
    per = {m: [] for m in cfg.methods}
    order = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for i in range(n):
            xh = test.X_hat[i]
            best = dict.fromkeys(cfg.methods, math.inf)
            # interleaved rounds, so machine drift hits every method alike
            for _ in range(cfg.timing_repeats):
                for m in order.permutation(list(cfg.methods)):
                    t0 = time.perf_counter()
                    verify(problem, artifacts[m], xh)
                    best[m] = min(best[m], time.perf_counter() - t0)
            for m in cfg.methods:
                per[m].append(best[m])
    finally:
        if gc_was_enabled:
            gc.enable()
    return {m: float(np.mean(v)) if v else float("nan") for m, v in per.items()}


def run_experiment(cfg: ExperimentConfig, progress: Optional[Callable[[str], None]] = None) -> CoverageReport:
    """Run the repeated-trial protocol and return a ``CoverageReport``."""
    say = progress or (lambda msg: None)
    weights = io.parse_weights(cfg.weights)
    problem = MonitorProblem(cfg.formula, cfg.dialect, cfg.tau0, cfg.t, cfg.agent, weights, cfg.ball_norm)
    estimate = isinstance(cfg.epsilon, str)
    pools = build_pools(cfg, estimate)
    if len(pools["calibration"]) < cfg.K:
        raise ValueError("K exceeds the calibration pool")
    say("pools: " + ", ".join(f"{k}={len(v)}" for k, v in pools.items()))

    predictor = make_predictor_from_spec(cfg.predictor)
    predictor.fit(pools["predictor_train"].X if "predictor_train" in pools else None)
    hats = {k: predict_full(problem, predictor, v.X) for k, v in pools.items() if k != "predictor_train"}

    shift = None
    if estimate:
        est = estimate_epsilon(problem, pools["shift_train"].X, hats["shift_train"],
                               pools["shift_test"].X, hats["shift_test"],
                               pools.get("alpha").X if "alpha" in pools else None, hats.get("alpha"),
                               methods=cfg.methods, alpha_floor=cfg.alpha_floor)
        shift = asdict(est)
        epsilon = float(est.epsilon)
        say(f"estimated epsilon = {epsilon:.4f} {est.components}")
    else:
        epsilon = float(cfg.epsilon)

    t0 = time.perf_counter()
    calib = _calib_cache(problem, cfg, pools, hats)
    say(f"calibration pool scored in {time.perf_counter() - t0:.1f}s")
    t0 = time.perf_counter()
    test = _test_cache(problem, cfg, pools["test"].X, hats["test"])
    say(f"test pool evaluated in {time.perf_counter() - t0:.1f}s")

    divs = {ROBUST: DivergenceSpec(cfg.divergence, epsilon), BASELINE: DivergenceSpec(cfg.divergence, 0.0)}
    rows, reps = [], []
    offline = {m: [] for m in cfg.methods}
    first_artifacts = {}
    test_ids = pools["test"].trials
    for r, ss in enumerate(_rep_seeds(cfg)):
        rng = np.random.default_rng(ss)
        cal_idx = np.sort(rng.choice(len(pools["calibration"]), cfg.K, replace=False))
        test_idx = np.sort(rng.choice(len(pools["test"]), cfg.M, replace=False))
        truth = test.rho_true[test_idx]
        for m in cfg.methods:
            for variant in VARIANTS:
                tq = time.perf_counter()
                scores = _scores(calib, m, cal_idx)
                art = artifact_from_scores(problem, m, scores, cfg.delta, divs[variant],
                                           calib.alpha.get(m), cfg.alpha_floor,
                                           predictor={"spec": cfg.predictor})
                tq = time.perf_counter() - tq
                if variant == ROBUST:
                    offline[m].append(calib.seconds[m][cal_idx].sum() + calib.alpha_seconds.get(m, 0.0) + tq)
                    if r == 0:
                        first_artifacts[m] = art
                rho, joint = _verdicts(problem, art, test, test_idx)
                covered = truth >= rho
                for k, i in enumerate(test_idx):
                    rows.append((r, m, variant, art.epsilon, test_ids[i], truth[k], rho[k],
                                 bool(covered[k]), joint[k]))
                finite = rho[np.isfinite(rho)]
                reps.append((r, m, variant, art.epsilon, art.C, art.quantile_index, art.feasible,
                             float(covered.mean()), float(np.nanmean(joint)) if m != ACCURATE else np.nan,
                             float(finite.mean()) if finite.size == rho.size else -np.inf))
        if (r + 1) % max(1, cfg.R // 5) == 0:
            say(f"repetition {r + 1}/{cfg.R}")

    rows_df = pd.DataFrame(rows, columns=["rep", "method", "variant", "epsilon", "trial", "rho_true",
                                          "rho_star", "covered", "joint_covered"])
    reps_df = pd.DataFrame(reps, columns=["rep", "method", "variant", "epsilon", "C", "quantile_index",
                                          "feasible", "coverage", "joint_coverage", "mean_rho_star"])
    summary = _summarize(reps_df, rows_df, cfg)
    online = _timing_pass(problem, cfg, first_artifacts, test)
    timing = {
        "offline_seconds_mean": {m: float(np.mean(v)) for m, v in offline.items()},
        "online_seconds_per_verdict": online,
        "offline_note": "score computation on the K sampled trajectories + alpha set + quantile",
        "online_note": "uncached verification of a predicted trajectory, prediction excluded",
    }
    diagnostics = {"graph_mismatch": test.mismatch} if test.mismatch else {}
    return CoverageReport(cfg.to_dict(), epsilon, rows_df, reps_df, summary, timing, shift, diagnostics)


def _summarize(reps: pd.DataFrame, rows: pd.DataFrame, cfg: ExperimentConfig) -> dict:
    out = {}
    for m in cfg.methods:
        for variant in VARIANTS:
            sel = reps[(reps.method == m) & (reps.variant == variant)]
            rsel = rows[(rows.method == m) & (rows.variant == variant)]
            cov = sel["coverage"].to_numpy()
            rho = rsel["rho_star"].to_numpy()
            hist, _ = np.histogram(cov, bins=HIST_BINS)
            finite = bool(np.all(np.isfinite(rho)))
            entry = {
                "mean_coverage": float(cov.mean()),
                "min_coverage": float(cov.min()),
                "max_coverage": float(cov.max()),
                "histogram_edges": HIST_BINS.tolist(),
                "histogram_counts": hist.tolist(),
                "mean_rho_star": _finite(float(rho.mean())) if finite else "-inf",
                "se_rho_star": float(rho.std(ddof=1) / np.sqrt(rho.size)) if finite and rho.size > 1 else None,
                "infeasible_repetitions": int((~sel["feasible"]).sum()),
                "mean_C": _finite(float(sel["C"].mean())),
                "epsilon": float(sel["epsilon"].iloc[0]),
            }
            if m != ACCURATE:
                entry["mean_joint_predicate_coverage"] = float(sel["joint_coverage"].mean())
            out[f"{m}/{variant}"] = entry
    return out
