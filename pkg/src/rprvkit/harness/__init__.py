"""Synthetic systems, dataset I/O, coverage experiments and the command line."""
from .experiment import CoverageReport, ExperimentConfig, run_experiment
from .io import Dataset, DatasetError, load_trajectories, parse_weights, save_trajectories, split_indices
from .systems import SwarmConfig, generate_noisy_reference, generate_swarm_lite, swarm_formula

__all__ = [
    "CoverageReport", "Dataset", "DatasetError", "ExperimentConfig", "SwarmConfig",
    "generate_noisy_reference", "generate_swarm_lite", "load_trajectories", "parse_weights",
    "run_experiment", "save_trajectories", "split_indices", "swarm_formula",
]
