"""Command line interface.

Exit codes: 0 success, 2 when every calibration was infeasible, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np
import pandas as pd

from ..conformal import DivergenceSpec
from ..logic.ast import FormulaError
from ..logic.parser import parse
from ..predictors import ARPredictor, ConstantVelocityPredictor
from ..rprv.api import predict_full
from ..rprv.methods import CalibrationArtifact, calibrate, verify
from ..rprv.problem import ACCURATE, METHODS, MonitorProblem
from ..semantics.boolean import eval_bool_strel, eval_bool_stl
from ..shift import estimate_epsilon
from . import io, systems
from .experiment import ExperimentConfig, run_experiment

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


# ---------------------------------------------------------------- helpers

def save_predictor(path, predictor) -> None:
    if isinstance(predictor, ConstantVelocityPredictor):
        body = {"kind": "cv", "window": int(predictor.window)}
    else:
        body = {"kind": "ar", "order": predictor.order, "ridge": predictor.ridge,
                "difference": bool(predictor.difference), "fit_intercept": bool(predictor.fit_intercept),
                "intercept": predictor.intercept_.tolist(), "coef": predictor.coef_.tolist(),
                "n_train": predictor.n_train_}
    io.save_json(path, body)


def load_predictor(path):
    with open(path) as fh:
        body = json.load(fh)
    if body.get("kind") == "cv":
        return ConstantVelocityPredictor(window=int(body.get("window", 1))).fit()
    if body.get("kind") == "ar":
        p = ARPredictor(order=int(body["order"]), ridge=float(body.get("ridge", 1e-6)),
                        difference=bool(body.get("difference", False)),
                        fit_intercept=bool(body.get("fit_intercept", True)))
        p.intercept_ = np.asarray(body["intercept"], dtype=float)
        p.coef_ = np.asarray(body["coef"], dtype=float)
        p.n_train_ = int(body.get("n_train", 0))
        if p.coef_.shape != (p.intercept_.size, p.order):
            raise CLIError("predictor file has inconsistent coefficient shapes")
        return p
    raise CLIError(f"unknown predictor kind in {path}")


def _weights(spec: Optional[str]):
    """A WeightSpec, or ``{trial: ExplicitWeights}`` for a CSV path."""
    if spec and spec.endswith(".csv"):
        if not os.path.exists(spec):
            raise CLIError(f"weight file {spec} not found")
        return io.load_weights(spec)
    return io.parse_weights(spec)


def _static_weights(spec: Optional[str]):
    w = _weights(spec)
    if isinstance(w, dict):
        raise CLIError("explicit weight files are only supported by 'monitor' "
                       "(predicted trajectories need a state-dependent rule)")
    return w


def _dialect(args) -> str:
    return args.dialect or ("strel" if args.weights else "stl")


def _problem(args) -> MonitorProblem:
    return MonitorProblem(args.formula, _dialect(args), args.tau0, args.t, args.agent,
                          _static_weights(args.weights), getattr(args, "ball_norm", "2"))


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    if args.system == "noisy-reference":
        X = systems.generate_noisy_reference(sigma=args.sigma, count=args.count, seed=args.seed)
    else:
        X = systems.generate_swarm_lite(args.agents, args.speed, args.count, args.seed)
    io.save_trajectories(args.out, X, [f"{args.prefix}{i:05d}" for i in range(args.count)])
    print(f"wrote {args.count} trajectories of shape {X.shape[1:]} to {args.out}")
    return EXIT_OK


def cmd_fit_predictor(args) -> int:
    if args.kind == "cv":
        pred = ConstantVelocityPredictor(window=args.window).fit()
    else:
        diff = args.kind == "dar"
        pred = ARPredictor(order=args.order, difference=diff, fit_intercept=not diff)
        pred.fit(io.load_trajectories(args.traj).X)
    save_predictor(args.out, pred)
    print(f"saved {args.kind} predictor to {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    problem = _problem(args)
    pred = load_predictor(args.predictor)
    calib = io.load_trajectories(args.traj)
    X_hat = predict_full(problem, pred, calib.X)
    kwargs = {}
    if args.method != ACCURATE:
        if not args.alpha_traj:
            raise CLIError("interpretable methods need --alpha-traj")
        alpha = io.load_trajectories(args.alpha_traj)
        if set(alpha.trials) & set(calib.trials):
            raise CLIError("alpha and calibration sets must be disjoint")
        kwargs = dict(X_alpha=alpha.X, X_hat_alpha=predict_full(problem, pred, alpha.X))
    div = DivergenceSpec(args.divergence, args.epsilon)
    art = calibrate(problem, args.method, calib.X, X_hat, args.delta, div,
                    predictor={"file": args.predictor}, splits={"calibration": calib.trials}, **kwargs)
    art.save(args.out)
    print(f"C = {art.C} (index {art.quantile_index} of K = {art.K}); artifact written to {args.out}")
    if not art.feasible:
        print("infeasible: K too small for this delta and epsilon", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify(args) -> int:
    art = CalibrationArtifact.load(args.artifact)
    w = _static_weights(args.weights) if args.weights else (io.parse_weights(art.weights) if art.weights else None)
    problem = MonitorProblem(art.formula, art.dialect, art.tau0, art.t, art.agent, w, art.ball_norm)
    pred = load_predictor(args.predictor)
    data = io.load_trajectories(args.traj)
    X_hat = predict_full(problem, pred, data.X)
    rows, bounds = [], []
    for trial, xh in zip(data.trials, X_hat):
        v = verify(problem, art, xh)
        rows.append((trial, v.rho_star, v.satisfied, v.level, art.method))
        for b in v.predicate_bounds():
            bounds.append((trial, b.predicate, b.tau, b.agent, b.value, b.radius))
    df = pd.DataFrame(rows, columns=["trial", "rho_star", "satisfied", "level", "method"])
    _write_or_print(df.to_csv(index=False, float_format="%.17g"), args.out)
    if bounds and args.out:
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        pd.DataFrame(bounds, columns=["trial", "predicate", "time", "agent", "bound", "radius"]).to_csv(
            stem + "_bounds.csv", index=False, float_format="%.17g")
    return EXIT_OK if art.feasible else EXIT_INFEASIBLE


def cmd_estimate_shift(args) -> int:
    problem = _problem(args)
    pred = load_predictor(args.predictor)
    train = io.load_trajectories(args.traj)
    test = io.load_trajectories(args.test)
    methods = tuple(args.methods.split(","))
    Xa = Xha = None
    if any(m != ACCURATE for m in methods):
        if not args.alpha_traj:
            raise CLIError("interpretable score types need --alpha-traj")
        Xa = io.load_trajectories(args.alpha_traj).X
        Xha = predict_full(problem, pred, Xa)
    est = estimate_epsilon(problem, train.X, predict_full(problem, pred, train.X),
                           test.X, predict_full(problem, pred, test.X), Xa, Xha,
                           methods=methods, grid_points=args.grid_points)
    _write_or_print(est.to_json() + "\n", args.out)
    return EXIT_OK


def _kv(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise CLIError(f"expected key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k] = float(v)
    return out


def cmd_experiment(args) -> int:
    conf = {}
    if args.config:
        with open(args.config) as fh:
            conf = json.load(fh)
    flags = {
        "system": args.system, "formula": args.formula, "dialect": args.dialect,
        "delta": args.delta, "divergence": args.divergence, "K": args.K, "M": args.M, "R": args.R,
        "t": args.t, "tau0": args.tau0, "agent": args.agent, "seed": args.seed,
        "weights": args.weights, "predictor": args.predictor, "n_agents": args.agents,
        "n_calibration": args.n_calibration, "n_test": args.n_test, "n_alpha": args.n_alpha,
        "n_predictor_train": args.n_predictor_train, "n_shift": args.n_shift,
    }
    conf.update({k: v for k, v in flags.items() if v is not None})
    if args.method:
        conf["methods"] = tuple(args.method.split(","))
    if args.epsilon is not None:
        conf["epsilon"] = args.epsilon if args.epsilon == "estimate" else float(args.epsilon)
    if args.train_param:
        conf["train_params"] = _kv(args.train_param)
    if args.test_param:
        conf["test_params"] = _kv(args.test_param)
    if args.traj or args.test_traj:
        conf["system"] = "files"
        conf["files"] = {"train": args.traj, "test": args.test_traj}
    cfg = ExperimentConfig(**conf)
    report = run_experiment(cfg, progress=None if args.quiet else (lambda m: print(m, file=sys.stderr)))
    paths = report.write(args.out)
    for key, entry in report.summary.items():
        print(f"{key:20s} mean coverage {entry['mean_coverage']:.3f}  mean rho* {entry['mean_rho_star']}")
    print(f"reports written to {', '.join(paths.values())}")
    robust = report.repetitions[report.repetitions.variant == "robust"]
    return EXIT_INFEASIBLE if not robust["feasible"].any() else EXIT_OK


def cmd_monitor(args) -> int:
    dialect = _dialect(args)
    formula = parse(args.formula, dialect)
    data = io.load_trajectories(args.traj)
    w = _weights(args.weights)
    rows = []
    for trial, x in zip(data.trials, data.X):
        wt = w.get(trial) if isinstance(w, dict) else w
        if isinstance(w, dict) and wt is None:
            raise CLIError(f"no weights for trial {trial}")
        problem = MonitorProblem(formula, dialect, args.tau0, 0, args.agent, wt)
        n = problem.tau0 + problem.length + 1
        if x.shape[0] < n:
            raise CLIError(f"trial {trial} has {x.shape[0]} steps, need {n}")
        rho = problem.robustness(x[:n])
        if dialect == "stl":
            sat = eval_bool_stl(formula, x[:n].reshape(n, -1), args.tau0)
        else:
            sat = eval_bool_strel(formula, x[:n], wt, args.tau0, args.agent)
        rows.append((trial, rho, sat))
    df = pd.DataFrame(rows, columns=["trial", "robustness", "satisfied"])
    _write_or_print(df.to_csv(index=False, float_format="%.17g"), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(p, formula=True, timing=True):
    if formula:
        p.add_argument("--formula", required=True, help="formula in the DSL")
        p.add_argument("--dialect", choices=["stl", "strel"], help="default: strel if --weights is given")
    p.add_argument("--weights", help="proximity:R | star:HUB | edges:1-2,.. | complete [:scaled=C][:dims=..] or a CSV file")
    p.add_argument("--agent", type=int, default=1, help="1-based agent (STREL)")
    p.add_argument("--tau0", type=int, default=0)
    if timing:
        p.add_argument("--t", type=int, required=True, help="current time")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rprvkit", description="Robust predictive runtime verification for STL/STREL")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample synthetic trajectories")
    p.add_argument("--system", choices=["noisy-reference", "swarm-lite"], required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--speed", type=float, default=6.0)
    p.add_argument("--agents", type=int, default=3)
    p.add_argument("--prefix", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit-predictor", help="fit a trajectory predictor")
    p.add_argument("--traj")
    p.add_argument("--kind", choices=["ar", "dar", "cv"], default="ar",
                   help="ar: levels with intercept; dar: first differences, no intercept")
    p.add_argument("--window", type=int, default=1, help="velocity averaging window for cv")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_predictor)

    p = sub.add_parser("calibrate", help="compute a calibration artifact")
    _common(p)
    p.add_argument("--traj", required=True, help="calibration trajectories")
    p.add_argument("--alpha-traj", help="separate trajectories for the normalizing constants")
    p.add_argument("--predictor", required=True)
    p.add_argument("--method", choices=list(METHODS), default=ACCURATE)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--divergence", default="tv")
    p.add_argument("--ball-norm", choices=["2", "inf"], default="2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="issue verdicts for observed prefixes")
    p.add_argument("--artifact", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--predictor", required=True)
    p.add_argument("--weights")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate-shift", help="TV distance between score distributions")
    _common(p)
    p.add_argument("--traj", required=True, help="design-distribution trajectories")
    p.add_argument("--test", required=True, help="deployment-distribution trajectories")
    p.add_argument("--alpha-traj")
    p.add_argument("--predictor", required=True)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--grid-points", type=int, default=4096)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate_shift)

    p = sub.add_parser("experiment", help="repeated-trial coverage experiment")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--system", choices=["noisy-reference", "swarm-lite", "files"])
    p.add_argument("--formula")
    p.add_argument("--dialect", choices=["stl", "strel"])
    p.add_argument("--method", help="comma-separated methods")
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", help="number or 'estimate'")
    p.add_argument("--divergence")
    p.add_argument("--K", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--tau0", type=int)
    p.add_argument("--agent", type=int)
    p.add_argument("--agents", type=int, help="swarm size")
    p.add_argument("--weights")
    p.add_argument("--predictor", help="cv, cv:<window>, ar:<order> or dar:<order>")
    p.add_argument("--seed", type=int)
    p.add_argument("--traj", help="design-distribution CSV (files system)")
    p.add_argument("--test-traj", help="deployment-distribution CSV (files system)")
    p.add_argument("--train-param", action="append", help="e.g. sigma=3")
    p.add_argument("--test-param", action="append", help="e.g. sigma=3.5")
    for name in ("n-calibration", "n-test", "n-alpha", "n-predictor-train", "n-shift"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("monitor", help="robust and Boolean semantics of complete trajectories")
    _common(p, timing=False)
    p.add_argument("--traj", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_monitor)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (CLIError, FormulaError, ValueError, KeyError, OSError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
