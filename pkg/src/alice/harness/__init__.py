"""Training runs, hyperparameter grids and experiment drivers."""
from .config import GridSpec, NetSpec, RunConfig, apply_overrides, method_objective
from .experiments import grid_search, lambda_sweep, pairing_experiment, summarize
from .train import RunRecord, build_networks, train

__all__ = [
    "GridSpec", "NetSpec", "RunConfig", "RunRecord", "apply_overrides", "build_networks",
    "grid_search", "lambda_sweep", "method_objective", "pairing_experiment", "summarize", "train",
]
