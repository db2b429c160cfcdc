"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavy experiment runs are module-scoped fixtures shared between the
coverage, conservatism and timing criteria.
"""
import math
import time

import numpy as np
import pytest

from rprvkit.conformal import (
    DivergenceSpec,
    g_func,
    g_inverse,
    min_calibration_size,
    robust_levels,
    robust_quantile,
    vanilla_quantile,
)
from rprvkit.harness import ExperimentConfig, run_experiment
from rprvkit.logic import formula_length, parse
from rprvkit.semantics import (
    ExplicitWeights,
    ProximityWeights,
    escape,
    eval_bool_stl,
    eval_bool_strel,
    eval_robust_stl,
    eval_robust_strel,
    min_distance,
    reach,
)

from _oracles import (
    escape_oracle,
    random_int_weights,
    random_stl,
    random_strel,
    reach_oracle,
    stl_oracle,
    strel_oracle,
)

METHODS = ("accurate", "interp1", "interp2")


@pytest.fixture
def report_line(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


# ------------------------------------------------------------------ semantics

def test_criterion_01_stl_oracle(report_line):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches = checked = 0
    while checked < 200:
        N, T = int(rng.integers(1, 5)), int(rng.integers(1, 13))
        f = parse(random_stl(rng, 3, N, max_hi=10))
        if formula_length(f) >= T:
            continue
        x = rng.integers(-3, 4, size=(T, N)).astype(float)
        checked += 1
        mismatches += eval_robust_stl(f, x) != stl_oracle(f, x)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 30
    report_line(1, ok, f"{checked} formulas, {mismatches} mismatches, {dt:.1f}s")
    assert ok


def test_criterion_02_strel_oracle(report_line):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        L = int(rng.integers(1, 6))
        w = random_int_weights(rng, L)
        s1 = rng.integers(-4, 5, L).astype(float)
        s2 = rng.integers(-4, 5, L).astype(float)
        d1 = float(rng.integers(0, 9))
        d2 = math.inf if rng.random() < 0.25 else float(rng.integers(int(d1), 9))
        bad += not np.array_equal(reach(w, s1, s2, d1, d2), reach_oracle(w, s1, s2, d1, d2))
        bad += not np.array_equal(escape(w, min_distance(w), s1, d1, d2), escape_oracle(w, s1, d1, d2))
    for _ in range(200):
        f = parse(random_strel(rng, 2, 2, max_hi=3, max_d=8), "strel")
        L = int(rng.integers(1, 6))
        T = formula_length(f) + 1
        mats = np.stack([random_int_weights(rng, L) for _ in range(T)])
        x = rng.integers(-3, 4, size=(T, L, 2)).astype(float)
        agent = int(rng.integers(1, L + 1))
        W = ExplicitWeights(mats)
        bad += eval_robust_strel(f, x, W, 0, agent) != strel_oracle(f, x, W.matrices, 0, agent - 1)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 60
    report_line(2, ok, f"200 operator + 200 formula instances, {bad} mismatches, {dt:.1f}s")
    assert ok


def test_criterion_03_soundness(report_line):
    rng = np.random.default_rng(103)
    violations = nonzero = 0
    for _ in range(1000):
        f = parse(random_stl(rng, 3, 2, max_hi=4))
        x = rng.normal(size=(formula_length(f) + 1, 2))
        rho = eval_robust_stl(f, x)
        if rho != 0:
            nonzero += 1
            violations += (rho > 0) != eval_bool_stl(f, x)
    w = ProximityWeights(threshold=1.5, scale=2.0)
    for _ in range(1000):
        f = parse(random_strel(rng, 3, 2), "strel")
        L = int(rng.integers(1, 5))
        x = rng.normal(size=(formula_length(f) + 1, L, 2))
        agent = int(rng.integers(1, L + 1))
        rho = eval_robust_strel(f, x, w, 0, agent)
        if rho != 0:
            nonzero += 1
            violations += (rho > 0) != eval_bool_strel(f, x, w, 0, agent)
    ok = violations == 0
    report_line(3, ok, f"2000 instances ({nonzero} nonzero), {violations} sign violations")
    assert ok


# ------------------------------------------------------------------ conformal

def test_criterion_04_conformal_reduction(report_line):
    rng = np.random.default_rng(104)
    diff = 0
    for _ in range(10_000):
        K = int(rng.integers(1, 51))
        delta = float(rng.uniform(0.01, 0.99))
        s = rng.normal(size=K)
        a, b = robust_quantile(s, delta, DivergenceSpec("tv", 0.0)), vanilla_quantile(s, delta)
        diff += a.value != b.value or a.index != b.index
    boundary = 0
    for delta in np.round(np.arange(0.05, 0.501, 0.05), 2):
        for eps in np.round(np.arange(0.0, 0.401, 0.05), 2):
            kmin = min_calibration_size(delta, DivergenceSpec("tv", eps))
            for K in range(1, 101):
                finite = math.isfinite(robust_quantile(np.zeros(K), delta, DivergenceSpec("tv", eps)).value)
                boundary += finite != (kmin is not None and K >= kmin)
    ok = diff == 0 and boundary == 0
    report_line(4, ok, f"{diff} reduction mismatches in 10^4 cases, {boundary} boundary mismatches")
    assert ok


def test_criterion_05_tv_closed_form_vs_generic(report_line):
    worst = 0.0
    for beta in np.linspace(0, 1, 100):
        for eps in np.linspace(0, 1, 100):
            a, b = DivergenceSpec("tv", eps), DivergenceSpec("tv", eps, closed_form=False)
            worst = max(worst, abs(g_func(a, beta) - g_func(b, beta)),
                        abs(g_inverse(a, beta) - g_inverse(b, beta)))
    ok = worst <= 1e-6
    report_line(5, ok, f"max |closed form - generic| = {worst:.2e} on 100x100 grid")
    assert ok


# ------------------------------------------------------------------ coverage runs

@pytest.fixture(scope="module")
def no_shift_run():
    # pools large enough that the 50 repetitions are close to independent draws
    cfg = ExperimentConfig(system="noisy-reference", methods=("accurate",), epsilon=0.0,
                           K=500, M=100, R=50, n_calibration=25_000, n_test=5_000, timing_trials=5)
    t0 = time.perf_counter()
    rep = run_experiment(cfg)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def shift_run():
    cfg = ExperimentConfig(system="noisy-reference", epsilon=0.142, test_params={"sigma": 3.5},
                           K=2000, M=100, R=50, n_calibration=3000, n_test=1000, timing_trials=20)
    t0 = time.perf_counter()
    rep = run_experiment(cfg)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def swarm_runs():
    out = {}
    for L in (3, 5):
        cfg = ExperimentConfig(system="swarm-lite", n_agents=L, epsilon="estimate",
                               test_params={"speed": 5.9}, K=500, M=100, R=20,
                               n_calibration=700, n_test=300, n_shift=400, n_predictor_train=300,
                               timing_trials=150, timing_repeats=5)
        t0 = time.perf_counter()
        rep = run_experiment(cfg)
        out[L] = (rep, time.perf_counter() - t0)
    return out


def _cov(rep, method, variant="robust"):
    return rep.summary[f"{method}/{variant}"]["mean_coverage"]


def test_criterion_06_coverage_no_shift(no_shift_run, report_line):
    rep, dt = no_shift_run
    cov = _cov(rep, "accurate")
    ok = cov >= 0.78 and dt < 300
    report_line(6, ok, f"accurate mean coverage {cov:.4f} (>= 0.78), {dt:.0f}s")
    assert ok


def test_criterion_07_coverage_under_shift(shift_run, report_line):
    rep, dt = shift_run
    covs = {m: _cov(rep, m) for m in METHODS}
    base = _cov(rep, "accurate", "baseline")
    ok = all(c >= 0.80 for c in covs.values()) and base < covs["accurate"] and dt < 900
    detail = ", ".join(f"{m} {c:.4f}" for m, c in covs.items())
    report_line(7, ok, f"robust {detail}; baseline accurate {base:.4f}; {dt:.0f}s")
    assert ok


def test_criterion_08_strel_coverage_under_shift(swarm_runs, report_line):
    parts, ok = [], True
    total = 0.0
    for L, (rep, dt) in swarm_runs.items():
        covs = {m: _cov(rep, m) for m in METHODS}
        ok &= all(c >= 0.80 for c in covs.values())
        total += dt
        parts.append(f"L={L} eps={rep.epsilon:.3f} " + " ".join(f"{m} {c:.3f}" for m, c in covs.items()))
    ok &= total < 1200
    report_line(8, ok, "; ".join(parts) + f"; {total:.0f}s")
    assert ok


def _margins(rep):
    """Paired margins of mean rho* between methods on identical test trials."""
    rows = rep.rows[rep.rows.variant == "robust"]
    piv = rows.pivot_table(index=["rep", "trial"], columns="method", values="rho_star")
    out = []
    for hi, lo in (("accurate", "interp2"), ("interp2", "interp1")):
        d = (piv[hi] - piv[lo]).to_numpy()
        d = d[np.isfinite(d)]
        out.append((hi, lo, float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))))
    return out


def test_criterion_09_conservatism_ordering(shift_run, swarm_runs, report_line):
    runs = {"noisy-reference": shift_run[0]}
    runs.update({f"swarm L={L}": rep for L, (rep, _) in swarm_runs.items()})
    parts, ok = [], True
    for name, rep in runs.items():
        for hi, lo, m, se in _margins(rep):
            ok &= m >= -se
            parts.append(f"{name} {hi}-{lo} {m:+.3f} (se {se:.3f})")
    report_line(9, ok, "; ".join(parts))
    assert ok


def test_criterion_10_complexity_regimes(swarm_runs, report_line):
    parts, ok = [], True
    for L, (rep, _) in swarm_runs.items():
        off = rep.timing["offline_seconds_mean"]
        on = rep.timing["online_seconds_per_verdict"]
        ok &= off["accurate"] > off["interp2"] > off["interp1"]
        ok &= on["interp1"] > on["interp2"] >= on["accurate"]
        parts.append(
            f"L={L} offline acc/i2/i1 = {off['accurate'] / off['interp1']:.1f}/"
            f"{off['interp2'] / off['interp1']:.1f}/1, online i1/i2/acc = "
            f"{on['interp1'] / on['accurate']:.3f}/{on['interp2'] / on['accurate']:.3f}/1"
        )
    report_line(10, ok, "; ".join(parts))
    assert ok


# ------------------------------------------------------------------ point values

def test_criterion_11_point_values(report_line):
    tv = lambda e: DivergenceSpec("tv", e)
    checks = {
        "length of predicate": formula_length(parse("s[0] >= 0")) == 0,
        "length G[0,5] F[0,3]": formula_length(parse("G[0,5] F[0,3] (s[0] >= 0)")) == 8,
        "length of reach": formula_length(parse("(s[0] >= 0) R[0,6] (s[1] >= 0)", "strel")) == 0,
        "length G[0,105]": formula_length(parse("G[0,105] (s[0] >= 60)")) == 105,
        "vanilla K=4 index": vanilla_quantile([1.0, 2.0, 3.0, 4.0], 0.2).index == 4,
        "vanilla K=3 infeasible": vanilla_quantile([1.0, 2.0, 3.0], 0.2).value == math.inf,
        "g^-1(0.8) at eps 0.05": abs(g_inverse(tv(0.05), 0.8) - 0.85) <= 1e-12,
        "K=20 chain": np.allclose(robust_levels(20, 0.2, tv(0.05)), (0.8925, 0.1575, 0.1075), atol=1e-6),
        "K=20 index": robust_quantile(np.arange(1.0, 21.0), 0.2, tv(0.05)).index == 18,
        "eps >= delta infeasible": robust_quantile(np.arange(100.0), 0.2, tv(0.2)).value == math.inf,
        "min K eps 0.1": min_calibration_size(0.2, tv(0.1)) == 9,
        "min K eps 0": min_calibration_size(0.2, tv(0.0)) == 4,
        "min K eps 0.25": min_calibration_size(0.2, tv(0.25)) is None,
        "example 3 robustness": eval_robust_stl(
            parse("G[0,5] F[0,3] ((s[0] >= 0) and (s[1] >= 0))"),
            np.array([[-1, -1, -1, -1, 1, 1, 2, 2, 2], [1, 1, 1, 2, 2, 2, 3, 3, 3]], float).T) == -1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    report_line(11, ok, f"{len(checks) - len(failed)}/{len(checks)} point values" +
                (f", failed: {failed}" if failed else ""))
    assert ok
