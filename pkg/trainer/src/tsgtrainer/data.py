"""Dataset loading and supervised window construction.

Consumes the simulator's dataset layout: train/val/test CSVs with one row
per control step (traj_id, t_s, chief state, deputy state, rel_distance_km,
t_back_s) plus a manifest carrying the split membership and the
training-split minimum shift used for target normalization.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STATE_COLUMNS = [f"xc_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")] + [
    f"xd_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")
]


class DatasetError(ValueError):
    """Dataset files are missing, malformed, or yield no training windows."""


@dataclass(frozen=True)
class Trajectory:
    traj_id: int
    times: np.ndarray
    states: np.ndarray  # (n, 12) chief+deputy
    rel_distance: np.ndarray
    t_back: np.ndarray


@dataclass(frozen=True)
class Dataset:
    directory: Path
    manifest: dict
    splits: dict[str, list[Trajectory]]

    @property
    def t_min(self) -> float:
        return float(self.manifest["t_min_s"])

    @property
    def phase_threshold(self) -> float:
        return float(self.manifest.get("phase_threshold_km", 1.0))


def _read_split(path: Path) -> list[Trajectory]:
    by_traj: dict[int, list[dict]] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            by_traj.setdefault(int(row["traj_id"]), []).append(row)
    out = []
    for tid in sorted(by_traj):
        rows = sorted(by_traj[tid], key=lambda r: float(r["t_s"]))
        out.append(
            Trajectory(
                traj_id=tid,
                times=np.array([float(r["t_s"]) for r in rows]),
                states=np.array([[float(r[c]) for c in STATE_COLUMNS] for r in rows]),
                rel_distance=np.array([float(r["rel_distance_km"]) for r in rows]),
                t_back=np.array([float(r["t_back_s"]) for r in rows]),
            )
        )
    return out


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"cannot parse manifest: {exc}") from exc
    splits = {}
    for name in ("train", "val", "test"):
        path = directory / f"{name}.csv"
        if not path.exists():
            raise DatasetError(f"missing {name}.csv in {directory}")
        splits[name] = _read_split(path)
    return Dataset(directory=directory, manifest=manifest, splits=splits)


def normalize_targets(t_back: np.ndarray, t_min: float) -> np.ndarray:
    """Min-max map of shifts onto [0, 1]: t_min -> 0, 0 -> 1.

    Values outside the training range (possible in val/test) are clipped.
    """
    if t_min >= 0:
        raise DatasetError(f"t_min must be negative, got {t_min}")
    return np.clip(1.0 - t_back / t_min, 0.0, 1.0)


def build_windows(
    trajectories: list[Trajectory],
    window_size: int,
    phase_lo: float,
    phase_hi: float,
    t_min: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Supervised pairs for one phase: (windows (n, w, 12), targets (n,)).

    A pair exists for every step whose relative distance lies in
    [phase_lo, phase_hi) and which has at least ``window_size`` rows of
    history inside the same trajectory.
    """
    if window_size < 1:
        raise DatasetError(f"window_size must be >= 1, got {window_size}")
    windows = []
    targets = []
    for traj in trajectories:
        n = len(traj.times)
        for k in range(window_size - 1, n):
            rel = traj.rel_distance[k]
            if not phase_lo <= rel < phase_hi:
                continue
            windows.append(traj.states[k - window_size + 1 : k + 1])
            targets.append(traj.t_back[k])
    if not windows:
        raise DatasetError(
            f"no windows for phase [{phase_lo}, {phase_hi}) at window size {window_size}"
        )
    return np.stack(windows), normalize_targets(np.array(targets), t_min)


def fold_indices(n_traj: int, folds: int) -> list[np.ndarray]:
    """Contiguous k-fold partition over trajectory indices, each used once."""
    if not 2 <= folds <= n_traj:
        raise DatasetError(f"need 2 <= folds <= {n_traj}, got {folds}")
    return [np.array(part) for part in np.array_split(np.arange(n_traj), folds)]
