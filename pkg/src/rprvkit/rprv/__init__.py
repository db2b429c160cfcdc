"""Robust predictive runtime verification: accurate and interpretable methods."""
from .api import (
    PredictiveMonitor,
    calibrate_accurate,
    calibrate_interp1,
    calibrate_interp2,
    predict_full,
    problem_from_artifact,
    verify_accurate,
    verify_interp1,
    verify_interp2,
    verify_observation,
)
from .methods import (
    ALPHA_FLOOR,
    CalibrationArtifact,
    PredicateBound,
    VerificationVerdict,
    accurate_score,
    artifact_from_scores,
    calibrate,
    calibration_data,
    fit_alpha,
    interp1_bounds,
    interp2_bounds,
    normalized_scores,
    predicate_errors,
    rho_bar,
    state_errors,
    verify,
)
from .problem import ACCURATE, INTERP1, INTERP2, METHODS, MonitorProblem

__all__ = [
    "ACCURATE", "ALPHA_FLOOR", "CalibrationArtifact", "INTERP1", "INTERP2",
    "METHODS", "MonitorProblem", "PredicateBound", "PredictiveMonitor",
    "VerificationVerdict", "accurate_score", "artifact_from_scores", "calibrate",
    "calibrate_accurate", "calibrate_interp1", "calibrate_interp2",
    "calibration_data", "fit_alpha", "interp1_bounds", "interp2_bounds",
    "normalized_scores", "predicate_errors", "predict_full", "problem_from_artifact",
    "rho_bar", "state_errors", "verify", "verify_accurate", "verify_interp1",
    "verify_interp2", "verify_observation",
]
