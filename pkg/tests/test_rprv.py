import math

import numpy as np
import pytest

from rprvkit.conformal import DivergenceSpec, vanilla_quantile
from rprvkit.harness.systems import NOISY_REFERENCE_FORMULA, generate_noisy_reference
from rprvkit.logic import parse
from rprvkit.predictors import ARPredictor, ConstantVelocityPredictor
from rprvkit.rprv import (
    ALPHA_FLOOR,
    CalibrationArtifact,
    MonitorProblem,
    PredictiveMonitor,
    artifact_from_scores,
    calibrate,
    calibrate_accurate,
    calibrate_interp1,
    calibrate_interp2,
    calibration_data,
    interp1_bounds,
    predict_full,
    rho_bar,
    verify,
    verify_observation,
)
from rprvkit.semantics import StarWeights, eval_robust_stl

TV = lambda eps: DivergenceSpec("tv", eps)


@pytest.fixture(scope="module")
def noisy():
    train = generate_noisy_reference(sigma=3.0, count=300, seed=1)
    calib = generate_noisy_reference(sigma=3.0, count=400, seed=2)
    alpha = generate_noisy_reference(sigma=3.0, count=100, seed=3)
    test = generate_noisy_reference(sigma=3.5, count=50, seed=4)
    pred = ARPredictor(order=5).fit(train)
    return pred, calib, alpha, test


def _problem():
    return MonitorProblem(NOISY_REFERENCE_FORMULA, "stl", 0, 100)


def test_horizon():
    p = _problem()
    assert p.H == 5
    assert p.n_steps == 106


def test_perfect_predictor_gives_zero_region(noisy):
    _, calib, alpha, _ = noisy
    p = _problem()
    art = calibrate(p, "accurate", calib, calib, 0.2, TV(0.0))
    assert art.C == 0.0
    v = verify(p, art, calib[0])
    assert v.rho_star == eval_robust_stl(parse(NOISY_REFERENCE_FORMULA), calib[0])
    for m in ("interp1", "interp2"):
        art = calibrate(p, m, calib, calib, 0.2, TV(0.0), X_alpha=alpha, X_hat_alpha=alpha)
        assert np.all(art.alpha == ALPHA_FLOOR)
        assert art.C == 0.0
        assert verify(p, art, calib[0]).rho_star == pytest.approx(v.rho_star)


def test_zero_epsilon_equals_baseline(noisy):
    pred, calib, _, _ = noisy
    p = _problem()
    art = calibrate_accurate(NOISY_REFERENCE_FORMULA, calib, pred, 0.2, TV(0.0), 0, 100)
    scores = calibration_data(p, "accurate", calib, predict_full(p, pred, calib))
    assert art.C == vanilla_quantile(scores, 0.2).value


def test_robust_region_larger_under_shift(noisy):
    pred, calib, _, _ = noisy
    robust = calibrate_accurate(NOISY_REFERENCE_FORMULA, calib, pred, 0.2, TV(0.142), 0, 100)
    base = calibrate_accurate(NOISY_REFERENCE_FORMULA, calib, pred, 0.2, TV(0.0), 0, 100)
    assert robust.C > base.C


def test_affine_bound_example():
    p = _problem()
    xh = np.full((106, 1, 1), 65.0)
    bounds, radii = interp1_bounds(p, xh, 2.0, np.ones((5, 1)))
    assert np.allclose(bounds, 3.0)
    assert np.allclose(radii, 2.0)


def test_infeasible_gives_minus_infinity(noisy):
    pred, calib, alpha, test = noisy
    p = _problem()
    for m in ("accurate", "interp1", "interp2"):
        kw = {} if m == "accurate" else dict(X_alpha=alpha, X_hat_alpha=predict_full(p, pred, alpha))
        art = calibrate(p, m, calib[:3], predict_full(p, pred, calib[:3]), 0.2, TV(0.1), **kw)
        assert not art.feasible
        v = verify_observation(art, test[0, :101], pred)
        assert v.rho_star == -math.inf
        assert not v.satisfied


def test_substituting_true_values_recovers_robustness(noisy):
    pred, calib, _, test = noisy
    p = MonitorProblem("G[0,105] ((s[0] >= 60) and not (s[0] >= 200))", "stl", 0, 100)
    xh = predict_full(p, pred, test[:1])[0]
    table_true = p.predicate_table(p.view(test[0]))
    table_hat = p.predicate_table(p.view(xh))
    fut = slice(101, 106)
    exact = rho_bar(p, test[0], table_true, table_true[:, fut])
    assert exact == eval_robust_stl(p.ast, test[0])
    assert np.isfinite(rho_bar(p, xh, table_hat, table_hat[:, fut]))


def test_monotone_conservatism(noisy):
    pred, calib, alpha, test = noisy
    p = _problem()
    xh = predict_full(p, pred, test[:5])
    for m in ("accurate", "interp1", "interp2"):
        kw = {} if m == "accurate" else dict(X_alpha=alpha, X_hat_alpha=predict_full(p, pred, alpha))
        art = calibrate(p, m, calib, predict_full(p, pred, calib), 0.2, TV(0.0), **kw)
        prev = None
        for C in (0.0, 0.5, 1.0, 2.0, math.inf):
            art.C = C
            r = [verify(p, art, x).rho_star for x in xh]
            if prev is not None:
                assert all(a <= b for a, b in zip(r, prev))
            prev = r


def test_interp2_bounds_at_zero_region(noisy):
    pred, _, alpha, test = noisy
    p = _problem()
    xh = predict_full(p, pred, test[:1])[0]
    art = calibrate_interp2(NOISY_REFERENCE_FORMULA, alpha, alpha, pred, 0.2, TV(0.0), 0, 100)
    art.C = 0.0
    v = verify(p, art, xh)
    table = p.predicate_table(p.view(xh))
    assert np.array_equal(v.bounds[:, :, 0], table[:, 101:106, 0])


def test_verdict_exposes_every_predicate_time():
    train = generate_noisy_reference(count=50, seed=0)
    pred = ARPredictor(order=3).fit(train)
    art = calibrate_interp1(NOISY_REFERENCE_FORMULA, train, train, pred, 0.2, TV(0.0), 0, 100)
    v = verify_observation(art, train[0, :101], pred)
    bounds = v.predicate_bounds()
    assert len(bounds) == 5
    assert [b.tau for b in bounds] == [101, 102, 103, 104, 105]
    assert all(b.radius is not None for b in bounds)


def test_artifact_json_round_trip(tmp_path, noisy):
    pred, calib, alpha, _ = noisy
    art = calibrate_interp2(NOISY_REFERENCE_FORMULA, calib[:50], alpha, pred, 0.2, TV(0.05), 0, 100)
    path = tmp_path / "art.json"
    art.save(path)
    back = CalibrationArtifact.load(path)
    assert back.C == art.C
    assert np.array_equal(back.alpha, art.alpha)
    assert back.kind == "interp2-stl"
    inf = artifact_from_scores(_problem(), "accurate", [1.0], 0.2, TV(0.1))
    assert '"inf"' in inf.to_json()
    assert CalibrationArtifact.from_json(inf.to_json()).C == math.inf


def test_interp1_strel_single_agent_equals_stl():
    X = generate_noisy_reference(count=60, seed=5)
    pred = ConstantVelocityPredictor().fit()
    stl = calibrate_interp1(NOISY_REFERENCE_FORMULA, X[:40], X[40:], pred, 0.2, TV(0.0), 0, 100)
    strel = calibrate_interp1(NOISY_REFERENCE_FORMULA, X[:40], X[40:], pred, 0.2, TV(0.0), 0, 100,
                              dialect="strel")
    assert stl.C == strel.C
    assert np.array_equal(stl.alpha, strel.alpha)


def test_strel_interpretable_alpha_shapes():
    rng = np.random.default_rng(0)
    X = np.cumsum(rng.normal(size=(40, 12, 3, 2)), axis=1)
    f = "G[0,3] somewhere[0,2] (s[0] >= -5)"
    w = StarWeights(hub=1, scale=1.0)
    pred = ConstantVelocityPredictor().fit()
    a1 = calibrate_interp1(f, X[:30], X[30:], pred, 0.2, TV(0.0), 0, 1, weights=w, agent=2)
    a2 = calibrate_interp2(f, X[:30], X[30:], pred, 0.2, TV(0.0), 0, 1, weights=w, agent=2)
    assert a1.alpha.shape == (2, 3)
    assert a2.alpha.shape == (1, 2, 3)


def test_predictive_monitor_estimator(noisy):
    pred, calib, alpha, test = noisy
    mon = PredictiveMonitor(NOISY_REFERENCE_FORMULA, method="interp2", epsilon=0.142, t=100,
                            predictor=pred).fit(calib, X_alpha=alpha)
    rho = mon.predict(test[:, :101])
    assert rho.shape == (50,)
    assert mon.verify(test[0, :101]).rho_star == rho[0]
    assert mon.get_params()["epsilon"] == 0.142


def test_interp_needs_alpha_set(noisy):
    pred, calib, _, _ = noisy
    with pytest.raises(ValueError):
        PredictiveMonitor(NOISY_REFERENCE_FORMULA, method="interp1", t=100, predictor=pred).fit(calib)


def test_negated_until_rejected_for_interpretable(noisy):
    pred, calib, alpha, _ = noisy
    f = "not ((s[0] >= 0) U[0,5] (s[0] >= 70))"
    with pytest.raises(ValueError):
        calibrate_interp1(f, calib[:10], alpha[:10], pred, 0.2, TV(0.0), 0, 100)
