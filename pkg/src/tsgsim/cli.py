"""Command-line interface: simulate, montecarlo, gen-dataset, verify-model, export-plots.

Exit codes: 0 success, 1 unexpected error, 2 constraint violation (including
an infeasible start), 64 usage/config error, 65 malformed model file. All
file outputs are deterministic for a fixed (config, seed, model files)
except the measured wall-clock fields: the gov_wall_s log column, the
timing section of the metrics JSON, and timing.json.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .dynamics import StateVector, vnb_frame
from .harness import (
    MissionInfeasibleError,
    compute_metrics,
    generate_dataset,
    monte_carlo,
    read_log_csv,
    run_mission,
    write_log_csv,
)
from .lstm import (
    ModelFormatError,
    SlidingWindow,
    denormalize,
    load_model,
    load_registry,
    lstm_forward,
    normalize_shift,
)
from .scenario import ConfigurationError, load_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2
EXIT_USAGE = 64
EXIT_MODEL_FORMAT = 65


def _metrics_doc(metrics) -> dict:
    d = metrics.to_dict()
    timing = {
        "avg_update_time_s": d.pop("avg_update_time_s"),
        "worst_update_time_s": d.pop("worst_update_time_s"),
    }
    return {"metrics": d, "timing": timing}


def _load_registry_arg(models_dir: str | None, mode: str):
    if mode != "ltsg":
        return None
    if not models_dir:
        raise ConfigurationError("--models DIR is required with --mode ltsg")
    return load_registry(models_dir)


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    registry = _load_registry_arg(args.models, args.mode)
    if args.deputy_offset:
        offset = np.array([float(x) for x in args.deputy_offset.split(",")])
        if offset.shape != (6,):
            raise ConfigurationError("--deputy-offset needs 6 comma-separated values")
        import dataclasses

        cfg = dataclasses.replace(cfg, nominal_rel_state=offset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        log = run_mission(cfg, mode=args.mode, registry=registry)
    except MissionInfeasibleError as exc:
        print(f"infeasible start: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    write_log_csv(log, out)
    metrics_path = out.with_suffix(".metrics.json")
    if log.rows:
        metrics = compute_metrics(log, cfg.completion_threshold)
        metrics_path.write_text(json.dumps(_metrics_doc(metrics), indent=1))
        violations = metrics.constraint_violations
        print(
            f"{cfg.name} {args.mode}: steps={metrics.steps} dv={metrics.delta_v:.4f} km/s "
            f"final_rel={metrics.final_rel_distance:.4g} km t_back={metrics.t_back_final:.4g} s "
            f"violations={violations} completed={metrics.completed}"
        )
        print(f"log: {out}\nmetrics: {metrics_path}")
        return EXIT_VIOLATION if violations > 0 else EXIT_OK
    metrics_path.write_text(json.dumps({"metrics": {"steps": 0}, "timing": {}}, indent=1))
    print(f"{cfg.name}: zero-duration run, empty log written to {out}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = load_scenario(args.config)
    registry = _load_registry_arg(args.models, args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    campaign = monte_carlo(
        cfg,
        mode=args.mode,
        registry=registry,
        runs=args.runs,
        seed=args.seed,
        keep_logs=True,
    )
    for run in campaign.runs:
        if run.log is not None:
            write_log_csv(run.log, out_dir / f"run_{run.index:03d}.csv")
    per_run = [
        {
            "index": r.index,
            "error": r.error,
            **(
                {k: v for k, v in r.metrics.to_dict().items() if "time" not in k}
                if r.metrics
                else {}
            ),
        }
        for r in campaign.runs
    ]
    summary = {"aggregate": campaign.aggregate(), "per_run": per_run}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1))
    (out_dir / "timing.json").write_text(json.dumps(campaign.timing(), indent=1))
    agg = campaign.aggregate()
    print(
        f"{cfg.name} {args.mode}: {agg['runs']} runs, {agg['completed_runs']} completed, "
        f"{agg['total_violations']} violations, {agg['failed_runs']} failed"
    )
    print(f"outputs in {out_dir}")
    if agg["failed_runs"]:
        return EXIT_ERROR
    return EXIT_VIOLATION if agg["total_violations"] else EXIT_OK


def cmd_gen_dataset(args) -> int:
    cfg = load_scenario(args.config)
    manifest = generate_dataset(cfg, args.n_traj, args.out, seed=args.seed)
    print(
        f"dataset for {cfg.name}: {manifest['n_traj']} trajectories, "
        f"split {[len(manifest['split'][k]) for k in ('train', 'val', 'test')]}, "
        f"t_min={manifest['t_min_s']:.4f} s -> {args.out}"
    )
    return EXIT_OK


def _parity_windows(model, n: int = 8):
    """Deterministic pseudo-state windows for the forward-pass parity hash."""
    rng = np.random.default_rng(0xC0FFEE)
    scale = np.sqrt(model.bn_var)
    for _ in range(n):
        w = SlidingWindow(model.window_size)
        t = 0.0
        for _ in range(model.window_size):
            rec = model.bn_mean + scale * rng.normal(0.0, 1.0, 12)
            w.push(t, rec[:6], rec[6:])
            t += 1.0
        yield w


def _dataset_windows(dataset_dir: Path, model, split: str = "test"):
    """Supervised (window, normalized target) pairs from a dataset split."""
    path = dataset_dir / f"{split}.csv"
    if not path.exists():
        raise ConfigurationError(f"no {split}.csv in {dataset_dir}")
    by_traj: dict[str, list[dict]] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            by_traj.setdefault(row["traj_id"], []).append(row)
    pairs = []
    for rows in by_traj.values():
        rows.sort(key=lambda r: float(r["t_s"]))
        for k in range(len(rows)):
            rel = float(rows[k]["rel_distance_km"])
            if not model.phase_contains(rel) or k + 1 < model.window_size:
                continue
            window = SlidingWindow(model.window_size)
            for r in rows[k + 1 - model.window_size : k + 1]:
                chief = [float(r[f"xc_{c}"]) for c in ("x", "y", "z", "vx", "vy", "vz")]
                deputy = [float(r[f"xd_{c}"]) for c in ("x", "y", "z", "vx", "vy", "vz")]
                window.push(float(r["t_s"]), np.array(chief), np.array(deputy))
            target = max(0.0, min(1.0, normalize_shift(model, float(rows[k]["t_back_s"]))))
            pairs.append((window, target))
    return pairs


def cmd_verify_model(args) -> int:
    try:
        model = load_model(args.model)
    except ModelFormatError as exc:
        print(f"malformed model file: {exc}", file=sys.stderr)
        return EXIT_MODEL_FORMAT
    print(f"model: {args.model}")
    print(
        f"dimensions ok: hidden={model.hidden_size} window={model.window_size} "
        f"phase=[{model.phase_lo}, {model.phase_hi}) km t_min={model.t_min} s"
    )
    outputs = [lstm_forward(model, w) for w in _parity_windows(model)]
    digest = hashlib.sha256(
        "".join(format(y, ".12e") for y in outputs).encode()
    ).hexdigest()[:16]
    print(f"forward-pass parity hash: {digest}")
    print(f"sample predictions (s): {[round(denormalize(model, y), 4) for y in outputs[:4]]}")
    if args.dataset:
        pairs = _dataset_windows(Path(args.dataset), model)
        if not pairs:
            print("test split contains no windows for this model's phase")
            return EXIT_OK
        preds = np.array([lstm_forward(model, w) for w, _ in pairs])
        targets = np.array([t for _, t in pairs])
        err = preds - targets
        mse = float(np.mean(err**2))
        msrelu = float(np.mean(np.maximum(err, 0.0) ** 2))
        print(f"test split: {len(pairs)} windows, mse={mse:.6e} msrelu={msrelu:.6e}")
    return EXIT_OK


def _write_plot_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(float(v), ".17g") if not isinstance(v, str) else v for v in row])


def cmd_export_plots(args) -> int:
    if args.frame not in ("vnb", "eci"):
        raise ConfigurationError(f"unknown frame {args.frame!r}; use vnb or eci")
    log = read_log_csv(args.log)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def relative(other_key):
        for r in log.rows:
            other = getattr(r, other_key)
            dp = r.deputy[:3] - other[:3]
            dv = r.deputy[3:] - other[3:]
            if args.frame == "vnb":
                frame = vnb_frame(StateVector(r.chief[:3], r.chief[3:]))
                dp = frame.basis.T @ dp
                dv = frame.basis.T @ dv
            yield [r.t, *dp, *dv]

    header = ["t_s", "dx", "dy", "dz", "dvx", "dvy", "dvz"]
    _write_plot_csv(out_dir / f"rel_chief_{args.frame}.csv", header, relative("chief"))
    _write_plot_csv(out_dir / f"rel_target_{args.frame}.csv", header, relative("target"))
    _write_plot_csv(
        out_dir / "constraints.csv",
        ["t_s", "h1", "h2", "h3", "h3_active"],
        (
            [r.t, r.report.h1, r.report.h2,
             r.report.h3 if r.report.h3 is not None else float("nan"),
             1.0 if r.report.h3 is not None else 0.0]
            for r in log.rows
        ),
    )
    _write_plot_csv(
        out_dir / "control.csv",
        ["t_s", "ux", "uy", "uz", "u_norm"],
        ([r.t, *r.u, np.linalg.norm(r.u)] for r in log.rows),
    )
    _write_plot_csv(
        out_dir / "time_shift.csv",
        ["t_s", "t_back_s"],
        ([r.t, r.t_back] for r in log.rows),
    )
    print(f"plot data written to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsgsim",
        description="Constrained rendezvous simulation with a time shift governor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one mission and write its log")
    sim.add_argument("--config", required=True, help="preset name or scenario JSON path")
    sim.add_argument("--mode", choices=("tsg", "ltsg"), default="tsg")
    sim.add_argument("--models", help="model directory (required for ltsg)")
    sim.add_argument("--deputy-offset", help="override nominal relative state, 6 CSV values")
    sim.add_argument("--out", required=True, help="trajectory log CSV path")
    sim.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("montecarlo", help="run a campaign over perturbed starts")
    mc.add_argument("--config", required=True)
    mc.add_argument("--mode", choices=("tsg", "ltsg"), default="tsg")
    mc.add_argument("--models")
    mc.add_argument("--runs", type=int, default=None)
    mc.add_argument("--seed", type=int, default=None)
    mc.add_argument("--jobs", type=int, default=1, help="reserved; campaign runs sequentially")
    mc.add_argument("--out", required=True, help="output directory")
    mc.set_defaults(func=cmd_montecarlo)

    gd = sub.add_parser("gen-dataset", help="generate a supervised dataset with the bisection governor")
    gd.add_argument("--config", required=True)
    gd.add_argument("--n-traj", type=int, required=True)
    gd.add_argument("--seed", type=int, default=None)
    gd.add_argument("--out", required=True)
    gd.set_defaults(func=cmd_gen_dataset)

    vm = sub.add_parser("verify-model", help="validate a model file and report test-split losses")
    vm.add_argument("--model", required=True)
    vm.add_argument("--dataset", help="dataset directory with a test.csv")
    vm.set_defaults(func=cmd_verify_model)

    ep = sub.add_parser("export-plots", help="emit plot-ready CSVs from a trajectory log")
    ep.add_argument("--log", required=True)
    ep.add_argument("--frame", default="vnb", help="vnb or eci")
    ep.add_argument("--out", required=True)
    ep.set_defaults(func=cmd_export_plots)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigurationError, ModelFormatError) as exc:
        if isinstance(exc, ModelFormatError):
            print(f"model format error: {exc}", file=sys.stderr)
            return EXIT_MODEL_FORMAT
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
