from .config import ExperimentConfig, load_experiment_config
from .exceptions import CellFailures, ExperimentError, MissingData, UnknownSelection
from .manifest import RunManifest
from .runner import Cell, GridOutcome, generate_data, grid_cells, grid_reports, run_curve, run_grid, summarize

__all__ = [
    "Cell",
    "CellFailures",
    "ExperimentConfig",
    "ExperimentError",
    "GridOutcome",
    "MissingData",
    "RunManifest",
    "UnknownSelection",
    "generate_data",
    "grid_cells",
    "grid_reports",
    "load_experiment_config",
    "run_curve",
    "run_grid",
    "summarize",
]
