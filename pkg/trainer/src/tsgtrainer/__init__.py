"""Offline training of phase-specific LSTM time-shift predictors."""

from .data import Dataset, DatasetError, build_windows, fold_indices, load_dataset, normalize_targets
from .loss import custom_loss, loss_components
from .model import TimeShiftLstm, export_model, model_to_interchange
from .train import (
    GridSearchResult,
    LossReport,
    PhaseSpec,
    TrainingConfig,
    TrainingError,
    grid_search_cv,
    leo_phase_specs,
    molniya_phase_specs,
    train_one,
)

__all__ = [
    "Dataset",
    "DatasetError",
    "GridSearchResult",
    "LossReport",
    "PhaseSpec",
    "TimeShiftLstm",
    "TrainingConfig",
    "TrainingError",
    "build_windows",
    "custom_loss",
    "export_model",
    "fold_indices",
    "grid_search_cv",
    "leo_phase_specs",
    "load_dataset",
    "loss_components",
    "model_to_interchange",
    "molniya_phase_specs",
    "normalize_targets",
    "train_one",
]

__version__ = "0.1.0"
