"""Training loop, early stopping, and grid search with trajectory-level CV."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import Dataset, DatasetError, build_windows, fold_indices
from .loss import custom_loss, loss_components
from .model import TimeShiftLstm

FULL_HIDDEN_GRID = (64, 128, 256)
FULL_DROPOUT_GRID = (0.10, 0.15, 0.20, 0.25, 0.30)
FULL_BATCH_GRID = (128, 256, 512, 1024, 2048)
FULL_LR_GRID = tuple(s1 * 10.0**s2 for s2 in (-3, -4, -5) for s1 in (5, 2, 1))
FULL_ETA_GRID = (0.1, 0.5, 1.0, 10.0, 100.0)

# one value per dimension keeps a desk-scale search tractable
REDUCED_HIDDEN_GRID = (64,)
REDUCED_DROPOUT_GRID = (0.10,)
REDUCED_BATCH_GRID = (128,)
REDUCED_LR_GRID = (2e-3,)
REDUCED_ETA_GRID = (1.0,)


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


@dataclass(frozen=True)
class PhaseSpec:
    """One predictor to train: its window size and phase interval."""

    name: str
    window_size: int
    phase_lo: float
    phase_hi: float


@dataclass(frozen=True)
class TrainingConfig:
    hidden_size: int = 64
    dropout: float = 0.10
    batch_size: int = 128
    learning_rate: float = 2e-3
    eta: float = 1.0
    max_epochs: int = 300
    patience: int = 15
    folds: int = 10
    flip_direction: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be below max_epochs")
        if min(self.hidden_size, self.batch_size) < 1 or self.learning_rate <= 0:
            raise ValueError("bad training hyperparameters")


@dataclass(frozen=True)
class EpochLosses:
    epoch: int
    split: str
    mse: float
    msrelu: float
    total: float


@dataclass
class LossReport:
    eta: float
    entries: list[EpochLosses] = field(default_factory=list)
    best_epoch: int = -1
    best_val_total: float = math.inf

    def add(self, epoch: int, split: str, mse: float, msrelu: float):
        self.entries.append(
            EpochLosses(epoch=epoch, split=split, mse=mse, msrelu=msrelu,
                        total=mse + self.eta * msrelu)
        )

    def series(self, split: str) -> list[EpochLosses]:
        return [e for e in self.entries if e.split == split]


def _to_tensors(windows: np.ndarray, targets: np.ndarray):
    return (
        torch.as_tensor(windows, dtype=torch.float32),
        torch.as_tensor(targets, dtype=torch.float32),
    )


def _eval_split(model, x, y, flip):
    model.eval()
    with torch.no_grad():
        pred = model(x)
    return loss_components(pred, y, flip)


def train_one(
    config: TrainingConfig,
    train_windows: np.ndarray,
    train_targets: np.ndarray,
    val_windows: np.ndarray,
    val_targets: np.ndarray,
) -> tuple[TimeShiftLstm, LossReport]:
    """Train one predictor with early stopping; returns best-validation weights."""
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise DatasetError("training and validation windows must be nonempty")
    torch.manual_seed(config.seed)
    x_train, y_train = _to_tensors(train_windows, train_targets)
    x_val, y_val = _to_tensors(val_windows, val_targets)
    model = TimeShiftLstm(config.hidden_size, config.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    report = LossReport(eta=config.eta)
    best_state = None
    stale = 0
    order_rng = torch.Generator().manual_seed(config.seed)
    n = len(x_train)
    for epoch in range(config.max_epochs):
        model.train()
        perm = torch.randperm(n, generator=order_rng)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            optimizer.zero_grad()
            pred = model(x_train[idx])
            loss = custom_loss(pred, y_train[idx], config.eta, config.flip_direction)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
        train_mse, train_msrelu = _eval_split(model, x_train, y_train, config.flip_direction)
        val_mse, val_msrelu = _eval_split(model, x_val, y_val, config.flip_direction)
        report.add(epoch, "train", train_mse, train_msrelu)
        report.add(epoch, "val", val_mse, val_msrelu)
        val_total = val_mse + config.eta * val_msrelu
        if val_total < report.best_val_total:
            report.best_val_total = val_total
            report.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.load_state_dict(best_state)
    model.eval()
    return model, report


@dataclass(frozen=True)
class GridSearchResult:
    phase: PhaseSpec
    best_config: TrainingConfig
    mean_cv_loss: float
    fold_losses: dict[str, list[float]]  # per grid point, keyed by its label


def _config_label(cfg: TrainingConfig) -> str:
    return (
        f"h{cfg.hidden_size}_d{cfg.dropout}_b{cfg.batch_size}"
        f"_lr{cfg.learning_rate:g}_eta{cfg.eta:g}"
    )


def grid_search_cv(
    dataset: Dataset,
    phase: PhaseSpec,
    reduced: bool = True,
    folds: int | None = None,
    max_epochs: int = 300,
    patience: int = 15,
    seed: int = 0,
) -> GridSearchResult:
    """Grid search with k-fold cross-validation at trajectory granularity.

    Each grid point is scored by the mean validation custom loss over the
    folds of the training split; the same loss drives training and model
    selection. The reduced grid (one value per dimension) keeps desk-scale
    runs tractable; the full grid is the published search space.
    """
    grids = (
        (REDUCED_HIDDEN_GRID, REDUCED_DROPOUT_GRID, REDUCED_BATCH_GRID,
         REDUCED_LR_GRID, REDUCED_ETA_GRID)
        if reduced
        else (FULL_HIDDEN_GRID, FULL_DROPOUT_GRID, FULL_BATCH_GRID,
              FULL_LR_GRID, FULL_ETA_GRID)
    )
    trajectories = dataset.splits["train"]
    folds = folds if folds is not None else min(10, len(trajectories))
    parts = fold_indices(len(trajectories), folds)
    fold_losses: dict[str, list[float]] = {}
    best_cfg = None
    best_mean = math.inf
    for hidden, dropout, batch, lr, eta in itertools.product(*grids):
        cfg = TrainingConfig(
            hidden_size=hidden, dropout=dropout, batch_size=batch,
            learning_rate=lr, eta=eta, max_epochs=max_epochs,
            patience=patience, seed=seed,
        )
        losses = []
        for fold in parts:
            val_traj = [trajectories[i] for i in fold]
            train_traj = [t for i, t in enumerate(trajectories) if i not in set(fold)]
            try:
                xw, xt = build_windows(
                    train_traj, phase.window_size, phase.phase_lo, phase.phase_hi, dataset.t_min
                )
                vw, vt = build_windows(
                    val_traj, phase.window_size, phase.phase_lo, phase.phase_hi, dataset.t_min
                )
            except DatasetError:
                continue
            _, report = train_one(cfg, xw, xt, vw, vt)
            losses.append(report.best_val_total)
        if not losses:
            raise DatasetError(f"no fold produced windows for phase {phase.name}")
        fold_losses[_config_label(cfg)] = losses
        mean = float(np.mean(losses))
        if mean < best_mean:
            best_mean = mean
            best_cfg = cfg
    return GridSearchResult(
        phase=phase, best_config=best_cfg, mean_cv_loss=best_mean, fold_losses=fold_losses
    )


def leo_phase_specs(threshold: float = 1.0) -> list[PhaseSpec]:
    """The three-predictor split: startup, far phase, close phase."""
    return [
        PhaseSpec(name="initial_w1", window_size=1, phase_lo=0.0, phase_hi=math.inf),
        PhaseSpec(name="far_w2", window_size=2, phase_lo=threshold, phase_hi=math.inf),
        PhaseSpec(name="near_w3", window_size=3, phase_lo=0.0, phase_hi=threshold),
    ]


def molniya_phase_specs(threshold: float = 1.0, window: int = 100) -> list[PhaseSpec]:
    """Two predictors sharing one long window across the phase boundary."""
    return [
        PhaseSpec(name="far_w100", window_size=window, phase_lo=threshold, phase_hi=math.inf),
        PhaseSpec(name="near_w100", window_size=window, phase_lo=0.0, phase_hi=threshold),
    ]
