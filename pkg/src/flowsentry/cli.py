"""Command-line interface.

Exit codes: 0 success, 2 config/parse error, 3 training abort, 4 schema mismatch.
Set ``FLOWSENTRY_LOG`` (DEBUG, INFO, WARNING...) to control log verbosity.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config, now_iso, write_manifest
from .datasets import make_synthetic_flows, write_flow_csv
from .evaluation import fmt, measure_latency, render_reports
from .flowdata import DEFAULT_ID_COLUMNS, FlowDataError, class_distribution, load_flow_csv
from .modeling import (SchemaMismatch, TrainedModel, TrainingAborted, cross_validate, ensemble_predict_proba,
                       evaluate_model, prepare_and_train, run_optimizer_activation_grid)
from .preprocess import PreprocessError, clean, feature_label_correlation, split_train_test

log = logging.getLogger("flowsentry")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_SCHEMA = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _setup_logging():
    level = os.environ.get("FLOWSENTRY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "data", None):
        cfg.data = list(args.data)
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "folds", None) is not None:
        cfg.folds = args.folds
    if getattr(args, "top_k_features", None) is not None:
        cfg.preprocess = type(cfg.preprocess)(**{**cfg.preprocess.to_dict(), "top_k_features": args.top_k_features})
    if getattr(args, "no_smote", False):
        cfg.preprocess = type(cfg.preprocess)(**{**cfg.preprocess.to_dict(), "smote": False})
    if getattr(args, "threshold", None) is not None:
        cfg.train = cfg.train.replace(threshold=args.threshold)
    if not cfg.data:
        raise ConfigError("no input data: set 'data' in the config or pass --data")
    if not cfg.out:
        raise ConfigError("no output directory: set 'out' in the config or pass --out")
    return cfg


def _load(cfg: RunConfig):
    ds = load_flow_csv(cfg.data, label_column=cfg.label_column, id_columns=cfg.id_columns,
                       benign_tokens=cfg.benign_tokens, rename_duplicates=cfg.rename_duplicate_columns)
    cleaned, report = clean(ds)
    log.info("cleaned %d -> %d rows (nan %d, inf %d)", report.rows_in, report.rows_out,
             report.rows_dropped_nan, report.rows_dropped_inf)
    return ds, cleaned, report


def _write_history(path: Path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
        for epoch, tl, vl, va in history.rows():
            w.writerow([epoch, fmt(tl), fmt(vl), fmt(va)])


# --------------------------------------------------------------------------
# commands


def cmd_inspect(args) -> int:
    started = now_iso()
    ds = load_flow_csv(args.paths, label_column=args.label_column,
                       rename_duplicates=args.rename_duplicate_columns)
    dist = class_distribution(ds)
    print(dist.format())
    cleaned, report = clean(ds)
    print(f"cleaning: kept {report.rows_out}/{report.rows_in} "
          f"(dropped nan {report.rows_dropped_nan}, inf {report.rows_dropped_inf})")
    corr = feature_label_correlation(cleaned)
    print("top features by |r|:")
    for name, r, defined in corr.ranked()[:args.top]:
        if defined:
            print(f"  {name:<40} {r:+.4f}")
    out = Path(args.out)
    render_reports(out, distribution=dist, correlation=corr)
    write_manifest(out, "inspect", sys.argv[1:], data_paths=args.paths, started_at=started)
    return EXIT_OK


def cmd_train(args) -> int:
    started = now_iso()
    cfg = _resolve_config(args)
    raw, cleaned, clean_report = _load(cfg)
    out = Path(cfg.out)
    tcfg = cfg.train_config
    train_part, test_part = split_train_test(cleaned, cfg.train_fraction, seed=cfg.seed)
    try:
        model, history = prepare_and_train(train_part, cfg.model, tcfg, cfg.preprocess)
    except TrainingAborted as exc:
        out.mkdir(parents=True, exist_ok=True)
        (out / "abort.json").write_text(json.dumps(exc.diagnostics, indent=2, sort_keys=True, default=str))
        raise CliError(f"training aborted: {exc}", EXIT_ABORT) from exc
    ev = evaluate_model(model, test_part, tcfg.threshold)
    name = cfg.model.family.lower()
    model.metrics = {"test": ev.report.to_dict(), "auc": ev.roc.auc if ev.roc else None}
    model.save(out)
    _write_history(out / "history.csv", history)
    render_reports(
        out,
        reports={name: ev.report},
        confusions={name: ev.confusion},
        rocs={name: ev.roc} if ev.roc else None,
        distribution=class_distribution(raw),
        correlation=model.preprocessor.correlation_,
    )
    extra = {"clean_report": vars(clean_report), "epochs_run": len(history), "best_epoch": history.best_epoch}
    if cfg.folds:
        cv = cross_validate(cfg.model, cleaned, cfg.folds, tcfg, cfg.preprocess, n_jobs=args.parallel)
        doc = {"k": cv.k, "fold_sizes": cv.fold_sizes, "summary": cv.summary,
               "folds": [r.to_dict() for r in cv.reports]}
        (out / "cv.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "train", sys.argv[1:], cfg, cfg.data, {"seed": cfg.seed}, started, extra)
    print(f"{cfg.model.family}: test accuracy {ev.report.accuracy:.4f}"
          + (f", AUC {ev.roc.auc:.4f}" if ev.roc else "") + f" -> {out}")
    return EXIT_OK


def cmd_grid(args) -> int:
    started = now_iso()
    cfg = _resolve_config(args)
    if cfg.model.family != "ANN":
        raise ConfigError("grid runs on the ANN family; set model.family to 'ANN'")
    _, cleaned, _ = _load(cfg)
    grid = run_optimizer_activation_grid(cleaned, cfg.model, cfg.train_config, cfg.preprocess,
                                         cfg.optimizer_overrides, cfg.train_fraction, n_jobs=args.parallel)
    out = Path(cfg.out)
    render_reports(out, grid=grid)
    cells = [{"activation": c.activation, "optimizer": c.optimizer, "seed": c.seed, "accuracy": c.accuracy,
              "status": c.status, "error": c.error} for c in grid.cells.values()]
    (out / "grid_cells.json").write_text(json.dumps(cells, indent=2, sort_keys=True) + "\n")
    seeds = {f"{c.activation}/{c.optimizer}": c.seed for c in grid.cells.values()}
    write_manifest(out, "grid", sys.argv[1:], cfg, cfg.data, {"seed": cfg.seed, "cells": seeds}, started)
    print(grid.format())
    for c in grid.failures():
        print(f"cell {c.activation}/{c.optimizer} failed: {c.error} (see grid_cells.json)", file=sys.stderr)
    return EXIT_OK


def _load_models(paths) -> List[TrainedModel]:
    try:
        return [TrainedModel.load(p) for p in paths]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model: {exc}") from exc


def cmd_eval(args) -> int:
    started = now_iso()
    models = _load_models(args.model)
    ref = models[0]
    label_column = ref.schema.label_column if ref.schema else "Label"
    ds = load_flow_csv(args.data, label_column=label_column,
                       id_columns=ref.schema.id_columns if ref.schema else DEFAULT_ID_COLUMNS,
                       rename_duplicates=args.rename_duplicate_columns)
    cleaned, _ = clean(ds)
    threshold = args.threshold if args.threshold is not None else ref.config.threshold
    reports, confusions, rocs, latency = {}, {}, {}, {}
    for i, m in enumerate(models):
        name = f"{m.spec.family.lower()}" if len(models) == 1 else f"{m.spec.family.lower()}_{i}"
        ev = evaluate_model(m, cleaned, threshold)
        reports[name], confusions[name] = ev.report, ev.confusion
        if ev.roc is not None:
            rocs[name] = ev.roc
        if args.latency:
            X = m.align(cleaned)
            latency[name] = measure_latency(m, X[: min(len(X), 1000)], repetitions=args.latency_repetitions)
    if len(models) > 1:
        from .evaluation import classification_report, confusion_matrix, roc_curve
        p = ensemble_predict_proba(models, models[0].align(cleaned))
        cm = confusion_matrix(p, cleaned.label_binary, threshold)
        reports["ensemble"], confusions["ensemble"] = classification_report(cm), cm
        if np.unique(cleaned.label_binary).size == 2:
            rocs["ensemble"] = roc_curve(p, cleaned.label_binary)
    out = Path(args.out)
    render_reports(out, reports=reports, confusions=confusions, rocs=rocs, latency=latency or None)
    write_manifest(out, "eval", sys.argv[1:], data_paths=args.data, started_at=started,
                   extra={"models": [str(p) for p in args.model], "threshold": threshold})
    for name, rep in reports.items():
        auc = f", AUC {rocs[name].auc:.4f}" if name in rocs else ""
        print(f"{name}: accuracy {rep.accuracy:.4f}{auc}")
    for name, lat in latency.items():
        print(f"{name}: latency p50 {lat.p50_ms:.4f} ms, p95 {lat.p95_ms:.4f} ms, p99 {lat.p99_ms:.4f} ms")
    return EXIT_OK


def cmd_predict(args) -> int:
    """Score every row; rows with NaN/inf features become error records."""
    models = _load_models(args.model)
    ref = models[0]
    ds = load_flow_csv([args.data], label_column=ref.schema.label_column if ref.schema else "Label",
                       id_columns=ref.schema.id_columns if ref.schema else DEFAULT_ID_COLUMNS,
                       require_label=False, rename_duplicates=args.rename_duplicate_columns)
    X = ref.align(ds)
    for m in models[1:]:
        m.align(ds)
    threshold = args.threshold if args.threshold is not None else ref.config.threshold
    ok = np.all(np.isfinite(X), axis=1)
    probs = np.full(len(X), np.nan)
    if ok.any():
        if len(models) == 1:
            probs[ok] = ref.predict_proba(X[ok])
        else:
            probs[ok] = ensemble_predict_proba(models, X[ok])
    out_path = Path(args.out) if args.out else None
    fh = open(out_path, "w", newline="") if out_path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "probability", "label", "error"])
        for i in range(len(X)):
            if ok[i]:
                w.writerow([i, fmt(probs[i]), "attack" if probs[i] >= threshold else "benign", ""])
            else:
                w.writerow([i, "", "", "non-finite feature value"])
    finally:
        if out_path:
            fh.close()
    failed = int((~ok).sum())
    print(f"rows: {len(X)}, rows_failed: {failed}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    ds = make_synthetic_flows(args.rows, args.features, args.separation, args.attack_fraction, args.seed)
    write_flow_csv(ds, args.out)
    print(f"wrote {len(ds)} rows to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowsentry", description="Flow-record intrusion detection toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp, folds=True):
        sp.add_argument("--config", help="JSON run config (or a previous run's manifest.json)")
        sp.add_argument("--data", nargs="+", help="flow CSV files (overrides config 'data')")
        sp.add_argument("--out", help="output directory (overrides config 'out')")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--parallel", type=int, default=1, help="worker processes for grid cells / CV folds")
        sp.add_argument("--top-k-features", type=int)
        sp.add_argument("--no-smote", action="store_true")
        if folds:
            sp.add_argument("--folds", type=int)

    sp = sub.add_parser("inspect", help="class distribution and feature-label correlation")
    sp.add_argument("paths", nargs="+")
    sp.add_argument("--out", default="inspect_out")
    sp.add_argument("--label-column", default="Label")
    sp.add_argument("--top", type=int, default=20)
    sp.add_argument("--rename-duplicate-columns", action="store_true")
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("train", help="preprocess, train, evaluate on a held-out split")
    run_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("grid", help="optimizer x activation grid for the ANN")
    run_flags(sp, folds=False)
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("eval", help="evaluate trained model(s) on labeled flows")
    sp.add_argument("--model", action="append", required=True, help="model.json or run directory (repeatable)")
    sp.add_argument("--data", nargs="+", required=True)
    sp.add_argument("--out", default="eval_out")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--latency", action="store_true", help="also measure single-record latency")
    sp.add_argument("--latency-repetitions", type=int, default=10_000)
    sp.add_argument("--rename-duplicate-columns", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("predict", help="per-row attack probabilities (soft vote over several --model)")
    sp.add_argument("--model", action="append", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", help="output CSV (default: stdout)")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--rename-duplicate-columns", action="store_true")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("synth", help="write the seeded synthetic flow dataset as CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--rows", type=int, default=4000)
    sp.add_argument("--features", type=int, default=20)
    sp.add_argument("--separation", type=float, default=1.5)
    sp.add_argument("--attack-fraction", type=float, default=0.44)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SchemaMismatch as exc:
        print(f"error: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConfigError, FlowDataError, PreprocessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
