"""Benchmark orchestration: split, classifier, detectors, metrics, reports.

One run = one split, one trained classifier shared by every detector, and an
optional test-time augmentation with equal numbers of OOD and adversarial
rows. Every number written to disk is a function of the config and the base
seed; wall-clock timings go to a separate file.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .baselines import (DetectorOutput, blr_residual_detector, confidnet_detector, dngo_detector,
                        direct_gp_detector, entropy_detector, introspection_detector, mcp,
                        true_class_probability, trust_score)
from .classifier import ClassifierOutput, MlpConfig, predict, train_mlp
from .data import LabeledDataset, fit_standardization, load_dataset, make_split, synth_adversarial, synth_ood
from .errors import ConfigError, DataError, NoMisclassificationError, NumericalError, RedError
from .metrics import METRIC_NAMES, evaluate_detector
from .optimizer import RestartSchedule
from .red import fit_red, member_predictions, score
from .stats import compare_pair, mean_rank, paired_t_test, wilcoxon_signed_rank, win_tie_loss
from .svg import scatter_svg

log = logging.getLogger(__name__)

DETECTORS = ("red", "red_variance", "mcp", "entropy", "trust_score", "dngo", "blr_residual",
             "direct_gp", "confidnet", "introspection")
# Sub-seed slots; each is mixed with the run seed through SeedSequence.
SEED_SLOTS = {"split": 0, "classifier": 1, "red": 2, "direct_gp": 3, "confidnet": 4,
              "introspection": 5, "ood": 6, "adversarial": 7}
# Each detector is compared against this reference on these metrics.
REFERENCE = {"red": ("ap_error", "aupr_error", "ap_success", "aupr_success", "auroc"),
             "red_variance": ("ap_ood", "aupr_ood", "ap_adversarial", "aupr_adversarial")}


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple = ()
    detectors: tuple = DETECTORS
    repeats: int = 10
    base_seed: int = 0
    num_restarts: int = 20
    staged_count: int = 10
    max_iterations: int = 1000
    mode: str = "exact"
    inducing_count: int = 50
    paper_selection: bool = False
    top_k: int = 3
    aggregation: str = "ensemble"
    ood: bool = True
    adversarial: bool = True
    standardization: str = "train"  # statistics from the training rows only, or "global"
    plots: bool = True
    out_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(str(p) for p in self.datasets))
        object.__setattr__(self, "detectors", tuple(self.detectors))

    def validate(self, check_paths: bool = True) -> "ExperimentConfig":
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        unknown = [d for d in self.detectors if d not in DETECTORS]
        if unknown:
            raise ConfigError(f"unknown detectors {unknown}; choose from {list(DETECTORS)}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("detectors must not repeat")
        if self.mode not in ("exact", "sparse"):
            raise ConfigError(f"mode must be 'exact' or 'sparse', got {self.mode!r}")
        if self.standardization not in ("train", "global"):
            raise ConfigError("standardization must be 'train' or 'global'")
        if self.aggregation not in ("ensemble", "best"):
            raise ConfigError("aggregation must be 'ensemble' or 'best'")
        if not 1 <= self.top_k <= self.num_restarts:
            raise ConfigError("top_k must lie in [1, num_restarts]")
        if self.inducing_count < 1:
            raise ConfigError("inducing_count must be >= 1")
        try:
            self.schedule(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if check_paths:
            if not self.datasets:
                raise ConfigError("no datasets configured")
            missing = [p for p in self.datasets if not Path(p).is_file()]
            if missing:
                raise ConfigError(f"dataset files not found: {missing}")
            names = [dataset_name(p) for p in self.datasets]
            if len(set(names)) != len(names):
                raise ConfigError("dataset file stems must be unique")
        return self

    def schedule(self, seed: int) -> RestartSchedule:
        return RestartSchedule(num_restarts=self.num_restarts, staged_count=self.staged_count,
                               max_iterations=self.max_iterations, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = list(self.datasets)
        d["detectors"] = list(self.detectors)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(d)


def dataset_name(path) -> str:
    return Path(path).stem


def run_seed(base_seed: int, run_index: int) -> int:
    return base_seed * 10000 + run_index


def sub_seed(seed: int, slot: str) -> int:
    return int(np.random.SeedSequence([seed, SEED_SLOTS[slot]]).generate_state(1, np.uint32)[0])


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def outputs_digest(out: ClassifierOutput) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(out.softmax).tobytes())
    h.update(np.ascontiguousarray(out.predicted).astype(np.int64).tobytes())
    if out.logits is not None:
        h.update(np.ascontiguousarray(out.logits).tobytes())
    return h.hexdigest()


@dataclass
class RunRecord:
    dataset: str
    run_index: int
    seed: int
    split_digest: str
    n_test: int
    n_ood: int
    n_adversarial: int
    accuracy: float
    train_errors: int
    classifier_fingerprint: str
    outputs_digest_before: str
    outputs_digest_after: str
    metrics: dict = field(default_factory=dict)  # detector -> {"values", "na_reasons"}
    na: dict = field(default_factory=dict)  # detector -> reason it produced no scores
    notes: list = field(default_factory=list)
    points: Optional[dict] = None  # RED mean/variance per test row, for plots
    timing: dict = field(default_factory=dict)  # kept out of deterministic reports

    @property
    def outputs_preserved(self) -> bool:
        return self.outputs_digest_before == self.outputs_digest_after

    def to_dict(self, with_timing: bool = False) -> dict:
        d = asdict(self)
        if not with_timing:
            d.pop("timing")
        return d

    @classmethod
    def from_dict(cls, d) -> "RunRecord":
        return cls(**d)

    def digest(self) -> str:
        return _digest(self.to_dict())

    def value(self, detector: str, metric: str) -> float:
        m = self.metrics.get(detector)
        v = None if m is None else m["values"].get(metric)
        return np.nan if v is None else float(v)


def _na_metrics(reason: str, ood: bool, adv: bool) -> dict:
    names = [m for m in METRIC_NAMES if (ood or "ood" not in m) and (adv or "adversarial" not in m)]
    return {"values": {m: None for m in names}, "na_reasons": {m: reason for m in names}}


def _paper_selected_metrics(cands: list, lmls, k: int) -> dict:
    """For each metric separately, average it over the ``k`` candidates that
    score best on that same metric (ties: higher LML, then restart order).
    Candidates without a value rank last and are not averaged."""
    out = {"values": {}, "na_reasons": {}}
    for m in cands[0]["values"]:
        def key(j):
            v = cands[j]["values"].get(m)
            return (v is None, -(v if v is not None else 0.0), -lmls[j], j)
        top = sorted(range(len(cands)), key=key)[:k]
        vals = [cands[j]["values"][m] for j in top if cands[j]["values"].get(m) is not None]
        if vals:
            out["values"][m] = float(np.mean(vals))
        else:
            out["values"][m] = None
            out["na_reasons"][m] = cands[0]["na_reasons"].get(m, "undefined")
    return out


def run_single(dataset: LabeledDataset, run_index: int, cfg: ExperimentConfig,
               name: str = "dataset") -> RunRecord:
    seed = run_seed(cfg.base_seed, run_index)
    plan = make_split(dataset.n, sub_seed(seed, "split"))
    fit_idx = plan.fit_indices
    stats = fit_standardization(dataset.features[fit_idx] if cfg.standardization == "train"
                                else dataset.features)
    Z = dataset.with_features(stats.apply(dataset.features))
    train, val, test, fit = (Z.subset(i) for i in (plan.train_indices, plan.val_indices,
                                                   plan.test_indices, fit_idx))
    timing = {}
    t0 = time.perf_counter()
    model = train_mlp(train, val, MlpConfig(seed=sub_seed(seed, "classifier")))
    timing["classifier"] = time.perf_counter() - t0
    fingerprint = model.fingerprint()
    out_fit = predict(model, fit.features)
    out_train = out_fit.subset(np.searchsorted(fit_idx, plan.train_indices))
    out_val = out_fit.subset(np.searchsorted(fit_idx, plan.val_indices))
    out_test = predict(model, test.features)
    val_mask = np.isin(fit_idx, plan.val_indices)
    correct_fit = out_fit.predicted == fit.labels
    correct_test = out_test.predicted == test.labels

    # test-time augmentation
    notes = []
    n_t = test.n
    blocks_X, blocks_out = [test.features], [out_test]
    n_ood = n_adv = 0
    if cfg.ood:
        ood = synth_ood(n_t, Z.m, sub_seed(seed, "ood"))
        blocks_X.append(ood.features)
        blocks_out.append(predict(model, ood.features))
        n_ood = n_t
    if cfg.adversarial:
        try:
            adv = synth_adversarial(fit, out_fit, n_t, sub_seed(seed, "adversarial"))
        except DataError as exc:
            notes.append(f"adversarial rows skipped: {exc}")
        else:
            blocks_X.append(adv.features)
            blocks_out.append(adv.fabricated_outputs)
            n_adv = n_t
    X_all = np.vstack(blocks_X)
    out_all = ClassifierOutput.concat(blocks_out)
    n_all = X_all.shape[0]
    ood_mask = np.zeros(n_all, bool)
    ood_mask[n_t:n_t + n_ood] = True
    adv_mask = np.zeros(n_all, bool)
    adv_mask[n_t + n_ood:] = True
    correct_all = np.zeros(n_all, bool)
    correct_all[:n_t] = correct_test
    before = outputs_digest(out_all)

    rec = RunRecord(name, run_index, seed, _digest(plan.to_dict()), n_t, n_ood, n_adv,
                    float(correct_test.mean()), int((~correct_fit).sum()), fingerprint, before, "",
                    notes=notes, timing=timing)

    def evaluate(scores):
        return evaluate_detector(scores, correct_all, ood_mask, adv_mask)

    def na(det, reason):
        rec.na[det] = reason
        rec.metrics[det] = _na_metrics(reason, n_ood > 0, n_adv > 0)

    wanted = set(cfg.detectors)
    if wanted & {"red", "red_variance"}:
        t0 = time.perf_counter()
        try:
            red = fit_red(fit.features, out_fit, fit.labels, cfg.schedule(sub_seed(seed, "red")),
                          cfg.mode, val_mask, cfg.top_k, cfg.aggregation, cfg.inducing_count,
                          fingerprint)
        except (NoMisclassificationError, NumericalError) as exc:
            for det in ("red", "red_variance"):
                if det in wanted:
                    na(det, str(exc))
        else:
            ds = score(red, X_all, out_all.softmax, out_all.max_prob, fingerprint)
            rec.points = {"mean": ds.mean.tolist(), "variance": ds.variance.tolist(),
                          "category": _categories(correct_all, ood_mask, adv_mask)}
            if cfg.paper_selection:
                per_cand = _candidate_metrics(red, X_all, out_all, evaluate)
                lmls = [g.lml for g in red.candidates]
                if "red" in wanted:
                    rec.metrics["red"] = _paper_selected_metrics([c[0] for c in per_cand], lmls, cfg.top_k)
                if "red_variance" in wanted:
                    rec.metrics["red_variance"] = _paper_selected_metrics([c[1] for c in per_cand], lmls,
                                                                          cfg.top_k)
            else:
                if "red" in wanted:
                    rec.metrics["red"] = evaluate(ds.mean)
                if "red_variance" in wanted:
                    rec.metrics["red_variance"] = evaluate(-ds.variance)
        timing["red"] = time.perf_counter() - t0

    def simple(det, fn):
        if det not in wanted:
            return
        t0 = time.perf_counter()
        try:
            res: DetectorOutput = fn()
        except (DataError, NumericalError) as exc:
            na(det, str(exc))
        else:
            rec.metrics[det] = evaluate(res.scores)
        timing[det] = time.perf_counter() - t0

    simple("mcp", lambda: mcp(out_all))
    simple("entropy", lambda: entropy_detector(out_all))
    simple("trust_score", lambda: trust_score(fit, X_all, out_all.predicted))
    simple("dngo", lambda: _need_logits(out_fit, out_all) or dngo_detector(
        out_fit.logits, correct_fit, out_all.logits))
    simple("blr_residual", lambda: blr_residual_detector(
        fit.features, out_fit.softmax, correct_fit - out_fit.max_prob, X_all, out_all.softmax,
        out_all.max_prob))
    simple("direct_gp", lambda: direct_gp_detector(
        fit.features, correct_fit, X_all, cfg.schedule(sub_seed(seed, "direct_gp")), cfg.mode,
        val_mask, cfg.top_k, cfg.inducing_count))
    simple("confidnet", lambda: confidnet_detector(
        train.features, true_class_probability(out_train, train.labels), val.features,
        true_class_probability(out_val, val.labels), X_all,
        MlpConfig(optimizer="rmsprop", seed=sub_seed(seed, "confidnet"))))
    simple("introspection", lambda: _need_logits(out_fit, out_all) or introspection_detector(
        out_train.logits, out_train.predicted == train.labels, out_val.logits,
        out_val.predicted == val.labels, out_all.logits,
        MlpConfig(optimizer="rmsprop", seed=sub_seed(seed, "introspection"))))

    rec.outputs_digest_after = outputs_digest(out_all)
    if not rec.outputs_preserved:
        raise RedError("classifier outputs changed while detectors ran")
    rec.metrics = {d: rec.metrics[d] for d in cfg.detectors if d in rec.metrics}
    return rec


def _need_logits(*outs):
    if any(o.logits is None for o in outs):
        raise DataError("this detector needs classifier logits")
    return None


def _categories(correct, ood, adv) -> list:
    cat = np.where(correct, "correct", "incorrect").astype(object)
    cat[ood] = "ood"
    cat[adv] = "adversarial"
    return cat.tolist()


def _candidate_metrics(red, X, out, evaluate):
    cands = [red.candidates[j] for j in range(len(red.candidates))]
    means, variances = member_predictions(red, X, out.softmax, cands)
    return [(evaluate(out.max_prob + mu), evaluate(-var)) for mu, var in zip(means, variances)]


def run_benchmark(cfg: ExperimentConfig, progress=None) -> list:
    cfg.validate()
    records = []
    for path in cfg.datasets:
        ds = load_dataset(path)
        name = dataset_name(path)
        for i in range(cfg.repeats):
            rec = run_single(ds, i, cfg, name)
            records.append(rec)
            if progress is not None:
                progress(rec)
            log.info("%s run %d: acc=%.3f train_errors=%d", name, i, rec.accuracy, rec.train_errors)
    return records


# --- aggregation -------------------------------------------------------------

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return "NA"
    return repr(float(v))


def _detector_order(records: list) -> list:
    present = {d for r in records for d in r.metrics}
    return [d for d in DETECTORS if d in present]


def summarize(records: list) -> list:
    """Rows (dataset, detector, metric, mean, std, n_runs) over runs with a value."""
    rows = []
    datasets = list(dict.fromkeys(r.dataset for r in records))
    for dname in datasets:
        recs = [r for r in records if r.dataset == dname]
        dets = _detector_order(recs)
        for det in dets:
            for m in METRIC_NAMES:
                vals = np.array([r.value(det, m) for r in recs])
                ok = vals[np.isfinite(vals)]
                if not any(m in r.metrics.get(det, {}).get("values", {}) for r in recs):
                    continue
                rows.append((dname, det, m, float(ok.mean()) if ok.size else None,
                             float(ok.std()) if ok.size else None, int(ok.size)))
    return rows


def paired_runs(records: list, dataset: str, det_a: str, det_b: str, metric: str):
    """Per-run values of two detectors on one dataset, keeping runs where both exist."""
    recs = [r for r in records if r.dataset == dataset]
    a = np.array([r.value(det_a, metric) for r in recs])
    b = np.array([r.value(det_b, metric) for r in recs])
    keep = np.isfinite(a) & np.isfinite(b)
    return a[keep], b[keep]


def comparisons(records: list, alpha: float = 0.05) -> list:
    """Per-dataset paired comparisons of each reference detector against the rest."""
    rows = []
    datasets = list(dict.fromkeys(r.dataset for r in records))
    dets = _detector_order(records)
    for ref, metrics in REFERENCE.items():
        if ref not in dets:
            continue
        for other in dets:
            if other in REFERENCE:
                continue
            for m in metrics:
                for dname in datasets:
                    a, b = paired_runs(records, dname, ref, other, m)
                    row = {"metric": m, "method_a": ref, "method_b": other, "dataset": dname,
                           "n_pairs": int(a.size), "mean_a": None, "mean_b": None,
                           "t_pvalue": None, "wilcoxon_pvalue": None, "outcome_either": "NA",
                           "outcome_both": "NA"}
                    if a.size:
                        row["mean_a"], row["mean_b"] = float(a.mean()), float(b.mean())
                    if a.size >= 2:
                        row["t_pvalue"] = paired_t_test(a, b).pvalue
                        row["wilcoxon_pvalue"] = wilcoxon_signed_rank(a, b).pvalue
                        sym = {1: "+", 0: "=", -1: "-"}
                        row["outcome_either"] = sym[compare_pair(a, b, alpha, "either")]
                        row["outcome_both"] = sym[compare_pair(a, b, alpha, "both")]
                    rows.append(row)
    return rows


def win_tie_loss_rows(records: list, alpha: float = 0.05) -> list:
    rows = []
    datasets = list(dict.fromkeys(r.dataset for r in records))
    dets = _detector_order(records)
    for ref, metrics in REFERENCE.items():
        if ref not in dets:
            continue
        for other in dets:
            if other in REFERENCE:
                continue
            for m in metrics:
                samples = [paired_runs(records, d, ref, other, m) for d in datasets]
                e = win_tie_loss(samples, alpha, "either")
                b = win_tie_loss(samples, alpha, "both")
                rows.append((m, ref, other) + e + b)
    return rows


def mean_rank_rows(records: list) -> list:
    summary = summarize(records)
    datasets = list(dict.fromkeys(r.dataset for r in records))
    dets = _detector_order(records)
    lookup = {(d, det, m): mean for d, det, m, mean, _, _ in summary}
    rows = []
    for m in METRIC_NAMES:
        present = [det for det in dets if any((d, det, m) in lookup for d in datasets)]
        if len(present) < 2:
            continue
        table = np.array([[np.nan if lookup.get((d, det, m)) is None else lookup[(d, det, m)]
                           for det in present] for d in datasets])
        try:
            means, stds, used = mean_rank(table)
        except DataError:
            continue
        rows.extend((m, det, float(mu), float(sd), used) for det, mu, sd in zip(present, means, stds))
    return rows


# --- report files ------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) or v is None else v for v in row])


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_report(records: list, out_dir, cfg: Optional[ExperimentConfig] = None, plots: bool = True) -> dict:
    """Write run records, tables, plots and a manifest under ``out_dir``.

    Returns the manifest. Timings go to ``timing.json``, which the manifest
    does not cover.
    """
    if not records:
        raise DataError("no run records to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs").mkdir(exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    written = []

    for r in records:
        p = out / "runs" / f"{r.dataset}__run{r.run_index:03d}.json"
        p.write_text(json.dumps(r.to_dict(), sort_keys=True, indent=1) + "\n")
        written.append(p)

    datasets = list(dict.fromkeys(r.dataset for r in records))
    for dname in datasets:
        recs = [r for r in records if r.dataset == dname]
        rows = []
        for r in recs:
            for det in _detector_order([r]):
                mrec = r.metrics[det]
                rows.append([r.run_index, r.seed, det] + [mrec["values"].get(m) for m in METRIC_NAMES]
                            + [";".join(f"{k}={v}" for k, v in sorted(mrec["na_reasons"].items()))])
        p = out / f"{dname}_runs.csv"
        _write_csv(p, ["run", "seed", "detector", *METRIC_NAMES, "na_reasons"], rows)
        written.append(p)

    p = out / "summary.csv"
    _write_csv(p, ["dataset", "detector", "metric", "mean", "std", "n_runs"], summarize(records))
    written.append(p)
    p = out / "comparisons.csv"
    comp = comparisons(records)
    header = ["metric", "method_a", "method_b", "dataset", "n_pairs", "mean_a", "mean_b",
              "t_pvalue", "wilcoxon_pvalue", "outcome_either", "outcome_both"]
    _write_csv(p, header, [[row[h] for h in header] for row in comp])
    written.append(p)
    p = out / "win_tie_loss.csv"
    _write_csv(p, ["metric", "method_a", "method_b", "wins_either", "ties_either", "losses_either",
                   "wins_both", "ties_both", "losses_both"], win_tie_loss_rows(records))
    written.append(p)
    p = out / "mean_rank.csv"
    _write_csv(p, ["metric", "detector", "mean_rank", "std_rank", "n_datasets"], mean_rank_rows(records))
    written.append(p)

    if plots:
        (out / "plots").mkdir(exist_ok=True)
        for r in records:
            if r.points is None:
                continue
            p = out / "plots" / f"{r.dataset}__run{r.run_index:03d}.svg"
            p.write_text(scatter_svg(r.points["variance"], r.points["mean"], r.points["category"],
                                     title=f"{r.dataset} run {r.run_index}",
                                     xlabel="variance of detection score", ylabel="mean detection score"))
            written.append(p)

    timing = {f"{r.dataset}/{r.run_index}": r.timing for r in records}
    (out / "timing.json").write_text(json.dumps(timing, sort_keys=True, indent=1) + "\n")

    manifest = {
        "format": "redgp.report/1",
        "config": None if cfg is None else {k: v for k, v in cfg.to_dict().items() if k != "out_dir"},
        "runs": [{"dataset": r.dataset, "run": r.run_index, "seed": r.seed, "digest": r.digest()}
                 for r in records],
        "versions": {"redgp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "files": {str(p.relative_to(out)): _sha(p) for p in written},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest


def load_records(out_dir) -> list:
    """Read back the run records written by :func:`emit_report`."""
    run_dir = Path(out_dir) / "runs"
    if not run_dir.is_dir():
        raise DataError(f"no runs/ directory under {out_dir}")
    paths = sorted(run_dir.glob("*.json"))
    if not paths:
        raise DataError(f"no run records under {run_dir}")
    recs = {(r.dataset, r.run_index): r
            for r in (RunRecord.from_dict(json.loads(p.read_text())) for p in paths)}
    mpath = Path(out_dir) / "manifest.json"
    if mpath.is_file():  # keep the original dataset order
        order = [(e["dataset"], e["run"]) for e in json.loads(mpath.read_text())["runs"]]
        if set(order) == set(recs):
            return [recs[k] for k in order]
    return [recs[k] for k in sorted(recs)]


def load_manifest(out_dir) -> dict:
    return json.loads((Path(out_dir) / "manifest.json").read_text())
