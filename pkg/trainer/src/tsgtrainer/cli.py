"""Trainer CLI: fit phase predictors from a dataset and export model files."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import DatasetError, build_windows, load_dataset
from .loss import loss_components
from .model import export_model
from .train import (
    TrainingError,
    grid_search_cv,
    leo_phase_specs,
    molniya_phase_specs,
    train_one,
)


def cmd_train(args) -> int:
    dataset = load_dataset(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    threshold = dataset.phase_threshold
    if args.phases == "leo":
        specs = leo_phase_specs(threshold)
    elif args.phases == "molniya":
        specs = molniya_phase_specs(threshold, window=args.molniya_window)
    else:
        raise DatasetError(f"unknown phase set {args.phases!r}; use leo or molniya")

    report: dict = {"dataset": str(args.dataset), "t_min_s": dataset.t_min, "phases": {}}
    exported_any = False
    for spec in specs:
        try:
            search = grid_search_cv(
                dataset,
                spec,
                reduced=not args.full_grid,
                folds=args.folds,
                max_epochs=args.max_epochs,
                patience=args.patience,
                seed=args.seed,
            )
            cfg = replace(search.best_config, seed=args.seed)
            train_w, train_t = build_windows(
                dataset.splits["train"], spec.window_size, spec.phase_lo, spec.phase_hi, dataset.t_min
            )
            val_w, val_t = build_windows(
                dataset.splits["val"], spec.window_size, spec.phase_lo, spec.phase_hi, dataset.t_min
            )
        except DatasetError as exc:
            print(f"{spec.name}: skipped ({exc})", file=sys.stderr)
            report["phases"][spec.name] = {"skipped": str(exc)}
            continue
        model, losses = train_one(cfg, train_w, train_t, val_w, val_t)
        exported_any = True
        path = out_dir / f"{spec.name}.json"
        export_model(model, dataset.t_min, spec.window_size, spec.phase_lo, spec.phase_hi, path)

        entry = {
            "model_file": path.name,
            "chosen_config": {
                "hidden_size": cfg.hidden_size,
                "dropout": cfg.dropout,
                "batch_size": cfg.batch_size,
                "learning_rate": cfg.learning_rate,
                "eta": cfg.eta,
            },
            "mean_cv_loss": search.mean_cv_loss,
            "fold_losses": search.fold_losses,
            "best_epoch": losses.best_epoch,
            "best_val_total": losses.best_val_total,
        }
        try:
            test_w, test_t = build_windows(
                dataset.splits["test"], spec.window_size, spec.phase_lo, spec.phase_hi, dataset.t_min
            )
            import torch

            model.eval()
            with torch.no_grad():
                pred = model(torch.as_tensor(test_w, dtype=torch.float32))
            mse, msrelu = loss_components(pred, torch.as_tensor(test_t, dtype=torch.float32))
            entry["test_mse"] = mse
            entry["test_msrelu"] = msrelu
        except DatasetError:
            entry["test_mse"] = None
            entry["test_msrelu"] = None
        report["phases"][spec.name] = entry
        print(
            f"{spec.name}: exported {path.name} "
            f"(cv={search.mean_cv_loss:.5f}, best epoch {losses.best_epoch}, "
            f"test mse={entry['test_mse']})"
        )
    (out_dir / "training_report.json").write_text(json.dumps(report, indent=1))
    print(f"training report: {out_dir / 'training_report.json'}")
    return 0 if exported_any else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgtrainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    tr = sub.add_parser("train", help="grid-search, train, and export phase predictors")
    tr.add_argument("--dataset", required=True, help="dataset directory with manifest.json")
    tr.add_argument("--out", required=True, help="output directory for model files")
    tr.add_argument("--phases", default="leo", help="leo or molniya")
    tr.add_argument("--molniya-window", type=int, default=100)
    tr.add_argument("--full-grid", action="store_true", help="search the full published grid")
    tr.add_argument("--folds", type=int, default=5)
    tr.add_argument("--max-epochs", type=int, default=300)
    tr.add_argument("--patience", type=int, default=15)
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(func=cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
