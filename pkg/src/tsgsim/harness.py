"""Closed-loop mission simulation, Monte Carlo campaigns, and dataset export.

The mission loop advances one control interval at a time: update the sliding
window, run the governor (bisection-only or hybrid), evaluate the saturated
control toward the shifted virtual target, log everything, and integrate the
deputy. The deputy integration and the in-loop constraint samples use the
same kernel and discretization as shift verification, so every state the
mission visits is exactly a sample the governor's accepted verification
already checked.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _fast
from .constraints import ConstraintConfig, ConstraintReport, evaluate_constraints
from .dynamics import ReferenceOrbit, StateVector
from .governor import GovernorRecord, bisection_tsg, hybrid_step, initial_shift
from .lqr import GainSchedule
from .lstm import ModelRegistry, SlidingWindow
from .scenario import ConfigurationError, ScenarioConfig

LOG_COLUMNS = (
    ["t_s"]
    + [f"xc_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + [f"xd_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + [f"xv_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + ["ux", "uy", "uz", "t_back_s", "h1", "h2", "h3", "h3_active", "gov_path", "gov_wall_s"]
)

DATASET_COLUMNS = (
    ["traj_id", "t_s"]
    + [f"xc_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + [f"xd_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + ["rel_distance_km", "t_back_s"]
)


class MissionInfeasibleError(RuntimeError):
    """No feasible initial time shift exists for the requested start."""


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    chief: np.ndarray
    deputy: np.ndarray
    target: np.ndarray
    u: np.ndarray
    t_back: float
    report: ConstraintReport
    gov: GovernorRecord


@dataclass
class TrajectoryLog:
    scenario: str
    mode: str
    control_dt: float
    rows: list[TrajectoryRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    @property
    def t_back_series(self) -> np.ndarray:
        return np.array([r.t_back for r in self.rows])

    @property
    def rel_distance_series(self) -> np.ndarray:
        return np.array(
            [float(np.linalg.norm(r.deputy[:3] - r.chief[:3])) for r in self.rows]
        )


@dataclass(frozen=True)
class Metrics:
    """Per-run summary in the shape of the performance-comparison table."""

    delta_v: float
    avg_update_time: float
    worst_update_time: float
    final_rel_distance: float
    constraint_violations: int
    completed: bool
    t_back_final: float
    steps: int

    def to_dict(self) -> dict:
        return {
            "delta_v_km_s": self.delta_v,
            "avg_update_time_s": self.avg_update_time,
            "worst_update_time_s": self.worst_update_time,
            "final_rel_distance_km": self.final_rel_distance,
            "constraint_violations": self.constraint_violations,
            "completed": self.completed,
            "t_back_final_s": self.t_back_final,
            "steps": self.steps,
        }


def _kernel_step(
    orbit: ReferenceOrbit,
    schedule: GainSchedule,
    cons: ConstraintConfig,
    t: float,
    deputy_vec: np.ndarray,
    t_back: float,
    control_dt: float,
    substeps: int,
):
    """One control interval with the same arithmetic as shift verification."""
    times = np.array([t, t + control_dt])
    chief = orbit.states_at(times)
    target = orbit.states_at(times + t_back)
    gidx = schedule.indices_at(times[:1] + t_back)
    _, _, _, xd, u, u_norm, h1, h3, h3_active = _fast.closed_loop_scan(
        deputy_vec,
        chief,
        target,
        schedule.gains,
        gidx,
        control_dt,
        substeps,
        orbit.model.mu,
        cons.u_max,
        cons.cos_alpha,
        cons.los_epsilon,
        cons.gamma1,
        cons.gamma2,
        cons.gamma3,
        False,
    )
    return (
        chief[0],
        target[0],
        xd[1],
        u[0],
        float(u_norm[0]),
        float(h1[0]),
        float(h3[0]),
        bool(h3_active[0]),
    )


def _report_from_kernel(h1: float, h2: float, h3: float, h3_active: bool) -> ConstraintReport:
    values = {"h1": h1, "h2": h2}
    h3_out = None
    if h3_active:
        values["h3"] = h3
        h3_out = h3
    worst = max(values, key=values.get)
    return ConstraintReport(h1=h1, h2=h2, h3=h3_out, satisfied=values[worst] <= 0.0, worst=worst)


def run_mission(
    cfg: ScenarioConfig,
    deputy0: StateVector | None = None,
    mode: str = "tsg",
    registry: ModelRegistry | None = None,
    schedule: GainSchedule | None = None,
    initial_t_back: float | None = None,
) -> TrajectoryLog:
    """Simulate one rendezvous mission and log every control step.

    ``mode`` is "tsg" (bisection-only governor) or "ltsg" (hybrid governor,
    needs ``registry``). The initial shift is searched unless
    ``initial_t_back`` is given; an infeasible start raises
    :class:`MissionInfeasibleError`.
    """
    if mode not in ("tsg", "ltsg"):
        raise ConfigurationError(f"mode must be 'tsg' or 'ltsg', got {mode!r}")
    if mode == "ltsg" and registry is None:
        raise ConfigurationError("ltsg mode requires a model registry")
    orbit = cfg.orbit
    schedule = schedule if schedule is not None else cfg.build_schedule()
    ctx = cfg.governor_context(schedule)
    chief0 = orbit.state_at(0.0)
    if deputy0 is None:
        deputy0 = StateVector.from_vec(chief0.vec + cfg.nominal_rel_state)

    log = TrajectoryLog(scenario=cfg.name, mode=mode, control_dt=cfg.control_dt)
    n_steps = int(round(cfg.duration / cfg.control_dt))
    if n_steps == 0:
        return log

    start = time.perf_counter()
    if initial_t_back is None:
        shift0 = initial_shift(ctx, 0.0, deputy0, cfg.shift_defaults)
        if shift0 is None:
            raise MissionInfeasibleError(
                f"no feasible initial time shift in [{cfg.governor.initial_lower_bound}, 0]"
            )
    else:
        shift0 = float(initial_t_back)
    init_wall = time.perf_counter() - start

    state = replace(cfg.shift_defaults, t_back=shift0, k1=0, k2=0)
    window = SlidingWindow(registry.max_window if registry is not None else 1)
    stride = max(1, int(round(cfg.governor.p_tsg / cfg.control_dt)))
    deputy_vec = deputy0.vec
    cons = cfg.constraints

    for k in range(n_steps):
        t = k * cfg.control_dt
        deputy = StateVector.from_vec(deputy_vec)
        if mode == "ltsg":
            window.push(t, orbit.state_at(t), deputy)
        if k == 0:
            rec = GovernorRecord(
                time=t, predicted=None, adopted=state.t_back, safe=True,
                path="initial", wall_s=init_wall,
            )
        elif k % stride == 0:
            gov_start = time.perf_counter()
            if mode == "tsg":
                out = bisection_tsg(ctx, t, deputy, state.t_back, state)
                state = replace(state, t_back=out.t_back)
                rec = GovernorRecord(
                    time=t, predicted=None, adopted=out.t_back,
                    safe=not out.warning, path="bisection",
                )
            else:
                state, rec = hybrid_step(ctx, state, window, t, deputy, registry)
            rec = replace(rec, wall_s=time.perf_counter() - gov_start)
        else:
            rec = GovernorRecord(
                time=t, predicted=None, adopted=state.t_back, safe=None, path="between-updates",
            )
        chief_vec, target_vec, next_vec, u, u_norm, h1, h3, h3_active = _kernel_step(
            orbit, schedule, cons, t, deputy_vec, state.t_back, cfg.control_dt, cfg.substeps
        )
        if not np.all(np.isfinite(next_vec)):
            raise RuntimeError(f"mission integration diverged at t={t}")
        h2 = u_norm - cons.u_max
        log.rows.append(
            TrajectoryRow(
                t=t,
                chief=chief_vec,
                deputy=deputy_vec,
                target=target_vec,
                u=u,
                t_back=state.t_back,
                report=_report_from_kernel(h1, h2, h3, h3_active),
                gov=rec,
            )
        )
        deputy_vec = next_vec

    # terminal sample at the end of the last interval, no control applied
    t_end = n_steps * cfg.control_dt
    chief_end = orbit.state_at(t_end)
    deputy_end = StateVector.from_vec(deputy_vec)
    report = evaluate_constraints(chief_end, deputy_end, np.zeros(3), cons)
    log.rows.append(
        TrajectoryRow(
            t=t_end,
            chief=chief_end.vec,
            deputy=deputy_vec,
            target=orbit.states_at(np.array([t_end + state.t_back]))[0],
            u=np.zeros(3),
            t_back=state.t_back,
            report=report,
            gov=GovernorRecord(
                time=t_end, predicted=None, adopted=state.t_back, safe=None, path="final"
            ),
        )
    )
    return log


def compute_metrics(log: TrajectoryLog, completion_threshold: float = 0.1) -> Metrics:
    """Fuel use, governor timing, and completion for one mission log."""
    if not log.rows:
        raise ValueError("cannot compute metrics for an empty log")
    delta_v = float(sum(np.linalg.norm(r.u) for r in log.rows) * log.control_dt)
    update_walls = [
        r.gov.wall_s for r in log.rows if r.gov.path in ("bisection", "model", "hold")
    ]
    final = log.rows[-1]
    final_rel = float(np.linalg.norm(final.deputy[:3] - final.chief[:3]))
    violations = sum(1 for r in log.rows if not r.report.satisfied)
    return Metrics(
        delta_v=delta_v,
        avg_update_time=float(np.mean(update_walls)) if update_walls else 0.0,
        worst_update_time=float(np.max(update_walls)) if update_walls else 0.0,
        final_rel_distance=final_rel,
        constraint_violations=violations,
        completed=final_rel < completion_threshold and final.t_back == 0.0,
        t_back_final=float(final.t_back),
        steps=max(0, len(log.rows) - 1),
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_log_csv(log: TrajectoryLog, path) -> None:
    """Trajectory log as CSV, one row per control step, 17 significant digits.

    The gov_wall_s column is measured wall time and is the one column
    excluded from determinism comparisons.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for r in log.rows:
            writer.writerow(
                [_fmt(r.t)]
                + [_fmt(v) for v in r.chief]
                + [_fmt(v) for v in r.deputy]
                + [_fmt(v) for v in r.target]
                + [_fmt(v) for v in r.u]
                + [
                    _fmt(r.t_back),
                    _fmt(r.report.h1),
                    _fmt(r.report.h2),
                    _fmt(r.report.h3) if r.report.h3 is not None else "nan",
                    "1" if r.report.h3 is not None else "0",
                    r.gov.path,
                    _fmt(r.gov.wall_s),
                ]
            )


def read_log_csv(path) -> TrajectoryLog:
    """Rebuild a log from CSV (prediction details and safe flags are not stored)."""
    path = Path(path)
    log = TrajectoryLog(scenario=path.stem, mode="unknown", control_dt=0.0)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != LOG_COLUMNS:
            raise ValueError(f"unexpected log header in {path}")
        for rec in reader:
            t = float(rec[0])
            chief = np.array([float(x) for x in rec[1:7]])
            deputy = np.array([float(x) for x in rec[7:13]])
            target = np.array([float(x) for x in rec[13:19]])
            u = np.array([float(x) for x in rec[19:22]])
            t_back = float(rec[22])
            h1, h2 = float(rec[23]), float(rec[24])
            h3_active = rec[26] == "1"
            h3 = float(rec[25]) if h3_active else None
            values = {"h1": h1, "h2": h2}
            if h3 is not None:
                values["h3"] = h3
            worst = max(values, key=values.get)
            log.rows.append(
                TrajectoryRow(
                    t=t,
                    chief=chief,
                    deputy=deputy,
                    target=target,
                    u=u,
                    t_back=t_back,
                    report=ConstraintReport(
                        h1=h1, h2=h2, h3=h3, satisfied=values[worst] <= 0.0, worst=worst
                    ),
                    gov=GovernorRecord(
                        time=t, predicted=None, adopted=t_back, safe=None,
                        path=rec[27], wall_s=float(rec[28]),
                    ),
                )
            )
    if len(log.rows) >= 2:
        log.control_dt = log.rows[1].t - log.rows[0].t
    return log


def draw_perturbation(rng: np.random.Generator, sigma_pos: float, sigma_vel: float) -> np.ndarray:
    """One zero-mean Gaussian state perturbation with isotropic per-block sigmas."""
    return np.concatenate([rng.normal(0.0, sigma_pos, 3), rng.normal(0.0, sigma_vel, 3)])


def sample_initial_states(
    cfg: ScenarioConfig,
    schedule: GainSchedule | None = None,
    runs: int | None = None,
    seed: int | None = None,
) -> list[StateVector]:
    """Draw perturbed deputy starts and keep only feasible ones.

    Feasibility means the constraints hold at t0 and an initial time shift
    exists. Raises :class:`ConfigurationError` when the retention rate drops
    below 1% after 10x the requested draws.
    """
    runs = cfg.mc.runs if runs is None else runs
    seed = cfg.mc.rng_seed if seed is None else seed
    schedule = schedule if schedule is not None else cfg.build_schedule()
    ctx = cfg.governor_context(schedule)
    orbit = cfg.orbit
    chief0 = orbit.state_at(0.0)
    nominal = chief0.vec + cfg.nominal_rel_state
    rng = np.random.default_rng(seed)
    retained: list[StateVector] = []
    draws = 0
    while len(retained) < runs:
        draws += 1
        delta = draw_perturbation(rng, cfg.sigma_pos, cfg.sigma_vel)
        deputy = StateVector.from_vec(nominal + delta)
        report = evaluate_constraints(chief0, deputy, np.zeros(3), cfg.constraints)
        if not report.satisfied:
            pass
        elif initial_shift(ctx, 0.0, deputy, cfg.shift_defaults) is None:
            pass
        else:
            retained.append(deputy)
        if draws >= 10 * runs and len(retained) < 0.01 * draws:
            raise ConfigurationError(
                f"retention rate {len(retained)}/{draws} below 1%; "
                "the scenario cannot seed a Monte Carlo campaign"
            )
    return retained


@dataclass(frozen=True)
class RunResult:
    index: int
    metrics: Metrics | None
    error: str | None = None
    log: TrajectoryLog | None = None


@dataclass(frozen=True)
class CampaignResult:
    scenario: str
    mode: str
    runs: list[RunResult]

    def aggregate(self) -> dict:
        """Deterministic aggregate (no wall-clock fields)."""
        ok = [r.metrics for r in self.runs if r.metrics is not None]
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "runs": len(self.runs),
            "failed_runs": sum(1 for r in self.runs if r.error is not None),
            "completed_runs": sum(1 for m in ok if m.completed),
            "total_violations": sum(m.constraint_violations for m in ok),
            "delta_v_mean_km_s": float(np.mean([m.delta_v for m in ok])) if ok else None,
            "delta_v_max_km_s": float(np.max([m.delta_v for m in ok])) if ok else None,
            "final_rel_distance_max_km": (
                float(np.max([m.final_rel_distance for m in ok])) if ok else None
            ),
        }

    def timing(self) -> dict:
        """Measured wall-clock aggregate, kept apart from the deterministic one."""
        ok = [r.metrics for r in self.runs if r.metrics is not None]
        return {
            "avg_update_time_s": float(np.mean([m.avg_update_time for m in ok])) if ok else None,
            "worst_update_time_s": (
                float(np.max([m.worst_update_time for m in ok])) if ok else None
            ),
        }


def monte_carlo(
    cfg: ScenarioConfig,
    mode: str = "tsg",
    registry: ModelRegistry | None = None,
    runs: int | None = None,
    seed: int | None = None,
    keep_logs: bool = False,
) -> CampaignResult:
    """Run the campaign over feasibility-filtered perturbed starts.

    Individual run failures are recorded and the campaign continues.
    """
    schedule = cfg.build_schedule()
    deputies = sample_initial_states(cfg, schedule=schedule, runs=runs, seed=seed)
    results: list[RunResult] = []
    for i, deputy0 in enumerate(deputies):
        try:
            log = run_mission(cfg, deputy0=deputy0, mode=mode, registry=registry, schedule=schedule)
            results.append(
                RunResult(
                    index=i,
                    metrics=compute_metrics(log, cfg.completion_threshold),
                    log=log if keep_logs else None,
                )
            )
        except Exception as exc:  # noqa: BLE001 - campaign must survive run failures
            results.append(RunResult(index=i, metrics=None, error=str(exc)))
    return CampaignResult(scenario=cfg.name, mode=mode, runs=results)


def generate_dataset(
    cfg: ScenarioConfig,
    n_traj: int,
    out_dir,
    seed: int | None = None,
) -> dict:
    """Bisection-governor missions from sampled starts, split 60/20/20 by trajectory.

    Writes train/val/test CSVs plus a manifest recording split membership,
    the training-split minimum shift, the phase threshold, and the seed.
    Returns the manifest dict.
    """
    if n_traj < 1:
        raise ConfigurationError(f"n_traj must be >= 1, got {n_traj}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg.mc.rng_seed if seed is None else seed
    schedule = cfg.build_schedule()
    deputies = sample_initial_states(cfg, schedule=schedule, runs=n_traj, seed=seed)

    n_train = int(round(0.6 * n_traj))
    n_val = int(round(0.2 * n_traj))
    n_train = max(1, n_train)
    n_val = max(0, min(n_val, n_traj - n_train))
    n_test = n_traj - n_train - n_val
    split = {
        "train": list(range(n_train)),
        "val": list(range(n_train, n_train + n_val)),
        "test": list(range(n_train + n_val, n_traj)),
    }

    writers = {}
    files = {}
    for name in ("train", "val", "test"):
        fh = (out_dir / f"{name}.csv").open("w", newline="")
        files[name] = fh
        writers[name] = csv.writer(fh)
        writers[name].writerow(DATASET_COLUMNS)

    t_min_train = 0.0
    try:
        for tid, deputy0 in enumerate(deputies):
            part = next(name for name, ids in split.items() if tid in ids)
            log = run_mission(cfg, deputy0=deputy0, mode="tsg", schedule=schedule)
            for r in log.rows:
                rel = float(np.linalg.norm(r.deputy[:3] - r.chief[:3]))
                writers[part].writerow(
                    [str(tid), _fmt(r.t)]
                    + [_fmt(v) for v in r.chief]
                    + [_fmt(v) for v in r.deputy]
                    + [_fmt(rel), _fmt(r.t_back)]
                )
                if part == "train":
                    t_min_train = min(t_min_train, r.t_back)
    finally:
        for fh in files.values():
            fh.close()

    manifest = {
        "scenario": cfg.name,
        "n_traj": n_traj,
        "seed": seed,
        "control_dt_s": cfg.control_dt,
        "split": split,
        "t_min_s": t_min_train,
        "phase_threshold_km": 1.0,
        "columns": DATASET_COLUMNS,
    }
    import json

    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest
