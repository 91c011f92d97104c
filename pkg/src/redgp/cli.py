"""Command-line interface.

Exit codes: 0 success, 1 other library error, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .classifier import MlpConfig, MlpModel, load_outputs, predict, save_outputs, train_mlp
from .data import (SplitPlan, StandardizationStats, fit_standardization, load_dataset, make_split,
                   save_dataset, synth_adversarial, synth_ood)
from .errors import ConfigError, DataError, RedError
from .harness import DETECTORS, ExperimentConfig, emit_report, load_manifest, load_records, run_benchmark
from .metrics import evaluate_detector
from .optimizer import RestartSchedule
from .red import RedModel, fit_red, score

log = logging.getLogger("redgp")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.add_argument("--mode", choices=("exact", "sparse"), default=None, help="GP inference mode")
    p.add_argument("--paper-selection", action="store_true", default=None,
                   help="pick RED's top models per metric on the test set (leaks test labels)")
    p.add_argument("--detectors", default=None, help=f"comma-separated subset of {','.join(DETECTORS)}")
    p.add_argument("--repeats", type=int, default=None, help="runs per dataset")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags()
    ap = argparse.ArgumentParser(prog="redgp", description="GP-based error detection for classifiers")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-classifier", parents=[g], help="split a dataset and train the MLP")
    p.add_argument("--data", required=True)

    p = sub.add_parser("fit-red", parents=[g], help="fit RED on a trained classifier's training rows")
    p.add_argument("--data", required=True)
    p.add_argument("--classifier", required=True, help="directory written by train-classifier")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--aggregation", choices=("ensemble", "best"), default="ensemble")

    p = sub.add_parser("score", parents=[g], help="score rows with a fitted RED model")
    p.add_argument("--data", required=True, help="CSV of rows to score (raw feature scale)")
    p.add_argument("--classifier", required=True)
    p.add_argument("--red", required=True, help="RED model JSON from fit-red")
    p.add_argument("--outputs", default=None,
                   help="precomputed classifier outputs for these rows (e.g. from synth adversarial)")

    p = sub.add_parser("synth", parents=[g], help="generate OOD or adversarial rows")
    p.add_argument("kind", choices=("ood", "adversarial"))
    p.add_argument("--data", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--count", type=int, default=None, help="rows to generate (default: test size)")

    p = sub.add_parser("evaluate", parents=[g], help="metrics from a scores CSV")
    p.add_argument("--scores", required=True, help="CSV from the score command")
    p.add_argument("--column", default="mean", choices=("mean", "variance"),
                   help="score column; variance is negated so high variance reads as suspicious")

    p = sub.add_parser("benchmark", parents=[g], help="run the repeated protocol on CSV datasets")
    p.add_argument("datasets", nargs="*", help="dataset CSVs (or set them in --config)")
    p.add_argument("--no-ood", action="store_true")
    p.add_argument("--no-adversarial", action="store_true")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("report", parents=[g], help="rebuild report tables from saved run records")
    p.add_argument("run_dir", help="directory holding runs/ from a previous benchmark")
    return ap


# --- helpers -----------------------------------------------------------------

def _require_out(args) -> Path:
    if not args.out:
        raise ConfigError(f"{args.command} needs --out")
    return Path(args.out)


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else args.seed


def _load_classifier(dirpath):
    d = Path(dirpath)
    try:
        model = MlpModel.load(d / "model.json")
        split = SplitPlan.from_dict(json.loads((d / "split.json").read_text()))
        stats = StandardizationStats.from_dict(json.loads((d / "standardization.json").read_text()))
    except FileNotFoundError as exc:
        raise DataError(f"classifier directory incomplete: {exc.filename}") from None
    return model, split, stats


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


# --- commands ------------------------------------------------------------------

def cmd_train_classifier(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    seed = _seed(args)
    plan = make_split(ds.n, seed)
    stats = fit_standardization(ds.features[plan.fit_indices])
    Z = ds.with_features(stats.apply(ds.features))
    model = train_mlp(Z.subset(plan.train_indices), Z.subset(plan.val_indices), MlpConfig(seed=seed))
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    _write_json(out / "split.json", plan.to_dict())
    _write_json(out / "standardization.json", stats.to_dict())
    outputs = predict(model, Z.features)
    save_outputs(outputs, out / "outputs.csv")
    test = plan.test_indices
    acc = float(np.mean(outputs.predicted[test] == ds.labels[test]))
    print(json.dumps({"test_accuracy": acc, "best_epoch": model.best_epoch,
                      "fingerprint": model.fingerprint()}, sort_keys=True))
    return 0


def cmd_fit_red(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    model, plan, stats = _load_classifier(args.classifier)
    fit_idx = plan.fit_indices
    X = stats.apply(ds.features[fit_idx])
    outputs = predict(model, X)
    sched = RestartSchedule(num_restarts=args.restarts, staged_count=args.restarts // 2, seed=_seed(args))
    red = fit_red(X, outputs, ds.labels[fit_idx], sched, args.mode or "exact",
                  np.isin(fit_idx, plan.val_indices), aggregation=args.aggregation,
                  classifier_fingerprint=model.fingerprint())
    red.save(out)
    _write_json(out.with_suffix(".fit_report.json"), red.fit_report.to_dict())
    print(json.dumps({"training_errors": red.targets.misclassified_count,
                      "selected_restarts": red.fit_report.selected}, sort_keys=True))
    return 0


def cmd_score(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    model, _, stats = _load_classifier(args.classifier)
    red = RedModel.load(args.red)
    X = stats.apply(ds.features)
    outputs = load_outputs(args.outputs, model.output_dim) if args.outputs else predict(model, X)
    if outputs.n != ds.n:
        raise DataError("outputs file and data differ in row count")
    ds_score = score(red, X, outputs.softmax, outputs.max_prob,
                     None if args.outputs else model.fingerprint())
    kinds = _read_kinds(args.data, ds.n)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "mean", "variance", "c_hat", "predicted", "label", "correct", "kind"])
        for i in range(ds.n):
            w.writerow([i, repr(float(ds_score.mean[i])), repr(float(ds_score.variance[i])),
                        repr(float(outputs.max_prob[i])), int(outputs.predicted[i]), int(ds.labels[i]),
                        int(outputs.predicted[i] == ds.labels[i]), kinds[i]])
    return 0


def _read_kinds(path, n) -> list:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames and "kind" in r.fieldnames:
            return [row["kind"] or "in" for row in r]
    return ["in"] * n


def cmd_synth(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    model, plan, stats = _load_classifier(args.classifier)
    count = args.count or plan.test_indices.size
    seed = _seed(args)
    if args.kind == "ood":
        batch = synth_ood(count, ds.m, seed)
        X_raw = stats.invert(batch.features)
        outputs = predict(model, batch.features)
    else:
        fit = ds.subset(plan.fit_indices)
        Z = fit.with_features(stats.apply(fit.features))
        batch = synth_adversarial(Z, predict(model, Z.features), count, seed)
        X_raw = stats.invert(batch.features)
        outputs = batch.fabricated_outputs
    synth_ds = batch.to_dataset(ds.num_classes, ds.feature_names).with_features(X_raw)
    save_dataset(synth_ds, out, kind=args.kind)
    save_outputs(outputs, out.with_suffix(".outputs.csv"))
    return 0


def cmd_evaluate(args) -> int:
    with open(args.scores, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{args.scores}: no rows")
    try:
        s = np.array([float(r[args.column]) for r in rows])
        correct = np.array([r["correct"] == "1" for r in rows])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{args.scores}: bad or missing column ({exc})") from None
    kind = np.array([r.get("kind", "in") for r in rows])
    if args.column == "variance":
        s = -s
    res = evaluate_detector(s, correct & (kind == "in"), kind == "ood", kind == "adversarial")
    text = json.dumps(res, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _benchmark_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    over = {}
    if getattr(args, "datasets", None):
        over["datasets"] = tuple(args.datasets)
    if args.seed is not None:
        over["base_seed"] = args.seed
    if args.mode is not None:
        over["mode"] = args.mode
    if args.paper_selection:
        over["paper_selection"] = True
    if args.detectors:
        over["detectors"] = tuple(d.strip() for d in args.detectors.split(",") if d.strip())
    if args.repeats is not None:
        over["repeats"] = args.repeats
    if args.out:
        over["out_dir"] = args.out
    if getattr(args, "no_ood", False):
        over["ood"] = False
    if getattr(args, "no_adversarial", False):
        over["adversarial"] = False
    if getattr(args, "no_plots", False):
        over["plots"] = False
    return replace(cfg, **over)


def cmd_benchmark(args) -> int:
    cfg = _benchmark_config(args).validate()
    if not cfg.out_dir:
        raise ConfigError("benchmark needs --out (or out_dir in the config)")
    records = run_benchmark(cfg, progress=lambda r: log.info("done %s run %d", r.dataset, r.run_index))
    emit_report(records, cfg.out_dir, cfg, cfg.plots)
    print(f"wrote {len(records)} run records to {cfg.out_dir}")
    return 0


def cmd_report(args) -> int:
    records = load_records(args.run_dir)
    try:
        cfg_d = load_manifest(args.run_dir).get("config")
    except FileNotFoundError:
        cfg_d = None
    cfg = ExperimentConfig.from_dict(cfg_d) if cfg_d else None
    out = args.out or args.run_dir
    emit_report(records, out, cfg, cfg.plots if cfg else True)
    print(f"report written to {out}")
    return 0


COMMANDS = {"train-classifier": cmd_train_classifier, "fit-red": cmd_fit_red, "score": cmd_score,
            "synth": cmd_synth, "evaluate": cmd_evaluate, "benchmark": cmd_benchmark, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except RedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
