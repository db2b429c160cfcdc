import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from rprvkit.predictors import (
    ARPredictor,
    ConstantVelocityPredictor,
    ExternalPredictor,
    make_predictor,
)


def _ar2_data(a1=1.5, a2=-0.7, c=0.3, count=5, T=60, seed=0):
    rng = np.random.default_rng(seed)
    X = np.empty((count, T, 1, 1))
    for m in range(count):
        x = list(rng.normal(size=2))
        for _ in range(T - 2):
            x.append(c + a1 * x[-1] + a2 * x[-2])
        X[m, :, 0, 0] = x
    return X


def test_constant_trajectory_is_fixed_point():
    X = np.full((3, 20, 2, 2), 4.0)
    obs = X[0, :10]
    for pred in (ConstantVelocityPredictor().fit(), ARPredictor(order=2).fit(X),
                 ARPredictor(order=3, difference=True, fit_intercept=False).fit(X)):
        out = pred.predict(obs, 7)
        assert out.shape == (7, 2, 2)
        assert np.allclose(out, 4.0)


def test_cv_extrapolates_ramp_exactly():
    obs = (2.5 * np.arange(8.0))[:, None, None]
    out = ConstantVelocityPredictor().fit().predict(obs, 5)
    assert np.array_equal(out[:, 0, 0], 2.5 * np.arange(8.0, 13.0))


def test_windowed_cv_averages_velocity():
    obs = np.array([0.0, 1.0, 2.0, 4.0])[:, None, None]
    out = ConstantVelocityPredictor(window=3).fit().predict(obs, 2)
    assert np.allclose(out[:, 0, 0], [4 + 4 / 3, 4 + 8 / 3])


def test_ar2_recovers_coefficients():
    X = _ar2_data()
    m = ARPredictor(order=2).fit(X)
    assert m.coef_[0] == pytest.approx([1.5, -0.7], abs=1e-6)
    assert m.intercept_[0] == pytest.approx(0.3, abs=1e-6)


def test_differenced_ar_is_speed_invariant():
    ramp = lambda v: (v * np.arange(40.0))[None, :, None, None]
    m = ARPredictor(order=2, difference=True, fit_intercept=False).fit(ramp(6.0))
    out = m.predict(ramp(5.9)[0, :20], 5)
    assert np.allclose(out[:, 0, 0], 5.9 * np.arange(20.0, 25.0))


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        ARPredictor(order=2).predict(np.zeros((5, 1, 1)), 3)


def test_observation_too_short():
    m = ARPredictor(order=4).fit(_ar2_data())
    with pytest.raises(ValueError):
        m.predict(np.zeros((3, 1, 1)), 2)
    with pytest.raises(ValueError):
        ConstantVelocityPredictor(window=5).fit().predict(np.zeros((5, 1, 1)), 2)


def test_rank_deficient_falls_back_to_ridge():
    m = ARPredictor(order=3).fit(np.zeros((2, 10, 1, 1)))
    assert m.used_ridge_.all()
    assert np.all(np.isfinite(m.coef_))


def test_deterministic_and_prefix_untouched():
    X = _ar2_data(count=2)
    m = ARPredictor(order=3).fit(X)
    obs = X[1, :20].copy()
    a = m.predict_trajectory(obs, 6)
    b = m.predict_trajectory(obs, 6)
    assert np.array_equal(a.full, b.full)
    assert np.array_equal(a.observed, X[1, :20])
    assert (a.t, a.H) == (19, 6)
    assert a.full.shape == (26, 1, 1)


def test_predict_many_shape():
    X = _ar2_data(count=4)
    out = ConstantVelocityPredictor().fit().predict_many(X[:, :10], 5)
    assert out.shape == (4, 15, 1, 1)
    assert np.array_equal(out[:, :10], X[:, :10])


def test_zero_horizon():
    out = ConstantVelocityPredictor().fit().predict(np.zeros((4, 2, 3)), 0)
    assert out.shape == (0, 2, 3)


def test_external_predictions_lookup():
    pred = ExternalPredictor({"a": np.ones((5, 1, 2))})
    assert pred.predict_trial("a", 3).shape == (3, 1, 2)
    with pytest.raises(KeyError):
        pred.predict_trial("b", 3)
    with pytest.raises(ValueError):
        pred.predict_trial("a", 6)


def test_make_predictor():
    assert isinstance(make_predictor("cv"), ConstantVelocityPredictor)
    assert make_predictor("ar", order=4).order == 4
    with pytest.raises(ValueError):
        make_predictor("lstm")
