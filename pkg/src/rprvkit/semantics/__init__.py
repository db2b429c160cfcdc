"""Boolean and robust semantics of STL and STREL."""
from .boolean import BooleanEvaluator, eval_bool_stl, eval_bool_strel
from .graph import (
    AdjacencyWeights,
    ExplicitWeights,
    GraphSnapshot,
    ProximityWeights,
    StarWeights,
    WeightSpec,
    graph_at,
    min_distance,
)
from .robust import (
    RobustEvaluator,
    TrajectoryTooShort,
    as_trajectory,
    eval_robust_stl,
    eval_robust_strel,
    robustness_trace,
    stl_view,
)
from .spatial import FixpointError, bounded_reach, escape, reach, unbounded_reach

__all__ = [
    "AdjacencyWeights", "BooleanEvaluator", "ExplicitWeights", "FixpointError",
    "GraphSnapshot", "ProximityWeights", "RobustEvaluator", "StarWeights",
    "TrajectoryTooShort", "WeightSpec", "as_trajectory", "bounded_reach",
    "escape", "eval_bool_stl", "eval_bool_strel", "eval_robust_stl",
    "eval_robust_strel", "graph_at", "min_distance", "reach",
    "robustness_trace", "stl_view", "unbounded_reach",
]
