"""Acceptance criteria 1-11.

Each test appends one PASS/FAIL line to ``LINES``; ``conftest.py`` prints
them at the end of the session. Criteria 6-8 run the repeated benchmark
under the reproduction protocol (top models chosen per metric on the test
rows). The same benchmark with validation-based selection is reported on
separate informational lines.
"""
import filecmp
import itertools
import time

import numpy as np
import pytest

from redgp.gp import fit_exact, fit_sparse, lml_and_grad, log_marginal_likelihood, predict, predict_sparse
from redgp.harness import ExperimentConfig, emit_report, run_benchmark
from redgp.kernel import KernelHyperparams
from redgp.metrics import RankedEvaluation, aupr, auroc, average_precision
from redgp.red import score
from redgp.stats import paired_t_test, wilcoxon_signed_rank
from conftest import DATASETS, dense_gp, random_hp, random_problem
from oracles import (ap_oracle, aupr_oracle, auroc_oracle, t_pvalue_quadrature,
                     wilcoxon_enumeration)

LINES = []
DESK = ("iris", "wine", "glass", "crabs", "diabetes")
BENCH_DETECTORS = ("red", "red_variance", "mcp")


def record(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append((num, 0, line))
    print(line)
    return ok


def note(num, text):
    line = f"     info {num:>2}: {text}"
    LINES.append((num, 1, line))
    print(line)


def bench_config(paper_selection):
    return ExperimentConfig(datasets=tuple(str(DATASETS / f"{d}.csv") for d in DESK),
                            detectors=BENCH_DETECTORS, repeats=10, paper_selection=paper_selection)


@pytest.fixture(scope="module")
def paper_bench(tmp_path_factory):
    cfg = bench_config(True)
    t0 = time.perf_counter()
    records = run_benchmark(cfg)
    elapsed = time.perf_counter() - t0
    out = tmp_path_factory.mktemp("bench_paper")
    emit_report(records, out, cfg)
    return records, out, elapsed


@pytest.fixture(scope="module")
def honest_bench(tmp_path_factory):
    cfg = bench_config(False)
    records = run_benchmark(cfg)
    out = tmp_path_factory.mktemp("bench_honest")
    emit_report(records, out, cfg, plots=False)
    return records, out


def paired_means(records, dataset, det_a, det_b, metric):
    recs = [r for r in records if r.dataset == dataset]
    a = np.array([r.value(det_a, metric) for r in recs])
    b = np.array([r.value(det_b, metric) for r in recs])
    keep = np.isfinite(a) & np.isfinite(b)
    if not keep.any():
        return None
    return float(a[keep].mean()), float(b[keep].mean()), int(keep.sum())


def directional(records, det_a, det_b, metric, strict):
    """(datasets where A beats B, per-dataset detail string)."""
    wins, parts = 0, []
    for d in DESK:
        pm = paired_means(records, d, det_a, det_b, metric)
        if pm is None:
            parts.append(f"{d} NA")
            continue
        a, b, n = pm
        ok = a > b if strict else a >= b
        wins += ok
        parts.append(f"{d} {a:.3f}{'>' if a > b else '=' if a == b else '<'}{b:.3f} (n={n})")
    return wins, "; ".join(parts)


def test_criterion_01_gp_dense_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n, m, k = int(rng.integers(1, 21)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        X, S, r = random_problem(rng, n, m, k)
        Xq, Sq, _ = random_problem(rng, 5, m, k)
        hp = random_hp(rng, m, k)
        lml_o, mean_o, var_o = dense_gp(hp, X, S, r, Xq, Sq)
        lml = log_marginal_likelihood(hp, X, S, r)
        mean, var = predict(fit_exact(hp, X, S, r), Xq, Sq)
        worst = max(worst, abs(lml - lml_o) / abs(lml_o),
                    np.abs(mean - mean_o).max() / max(np.abs(mean_o).max(), 1e-300),
                    np.abs(var - var_o).max() / np.abs(var_o).max())
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 5
    assert record(1, ok, f"50 instances, worst relative error {worst:.2e} (< 1e-10), {elapsed:.2f}s (< 5s)")


def test_criterion_02_gradients():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        n, m, k = int(rng.integers(3, 21)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        X, S, r = random_problem(rng, n, m, k)
        hp = random_hp(rng, m, k)
        theta = hp.to_log()
        _, g = lml_and_grad(hp, X, S, r)
        h = 1e-5
        for p in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[p] += h
            dn[p] -= h
            fd = (log_marginal_likelihood(KernelHyperparams.from_log(up, m, k), X, S, r)
                  - log_marginal_likelihood(KernelHyperparams.from_log(dn, m, k), X, S, r)) / (2 * h)
            worst = max(worst, abs(g[p] - fd) / max(abs(fd), abs(g[p]), 1e-8))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 10
    assert record(2, ok, f"10 instances, all hyperparameters, worst relative error {worst:.2e} (< 1e-5), "
                         f"{elapsed:.2f}s (< 10s)")


def test_criterion_03_far_points():
    from redgp.classifier import ClassifierOutput
    from redgp.data import load_dataset
    from redgp.optimizer import RestartSchedule
    from redgp.red import fit_red
    rng = np.random.default_rng(3)
    worst_mean = worst_var = 0.0
    # a RED model fitted on real data plus random hand-set models
    ds = load_dataset(DATASETS / "glass.csv")
    X = (ds.features - ds.features.mean(0)) / ds.features.std(0)
    S = rng.dirichlet(np.ones(ds.num_classes), ds.n)
    out = ClassifierOutput(S)
    models = [fit_red(X, out, ds.labels, RestartSchedule(num_restarts=4, staged_count=2))]
    from redgp.red import RedModel, ResidualTargets
    for _ in range(5):
        Xh, Sh, rh = random_problem(rng, 15, 3, 3)
        hp = random_hp(rng, 3, 3)
        t = ResidualTargets(np.ones(15), rh)
        models.append(RedModel([fit_exact(hp, Xh, Sh, rh)], np.array([0.0]), [0], Xh, Sh, t))
    for model in models:
        li = max(g.hp.input_lengthscales.max() for g in model.members)
        lo = max(g.hp.output_lengthscales.max() for g in model.members)
        Xq = model.train_X.max(axis=0) + 100 * li + rng.uniform(0, 5, (4, model.train_X.shape[1])) * li
        Sq = model.train_S.max(axis=0) + 100 * lo + rng.uniform(0, 5, (4, model.train_S.shape[1])) * lo
        c_hat = rng.uniform(0.3, 1.0, 4)
        d = score(model, Xq, Sq, c_hat)
        prior = np.mean([g.hp.input_signal_var + g.hp.output_signal_var for g in model.members])
        worst_mean = max(worst_mean, np.abs(d.mean - c_hat).max())
        worst_var = max(worst_var, np.abs(d.variance - prior).max())
    ok = worst_mean < 1e-6 and worst_var < 1e-6
    assert record(3, ok, f"{len(models)} models, max |mean - c_hat| {worst_mean:.1e}, "
                         f"max |variance - prior| {worst_var:.1e} (< 1e-6)")


def test_criterion_04_metric_oracles():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    count = identical = 0
    worst = 0.0
    for n in range(2, 9):
        for lab in itertools.product((0, 1), repeat=n):
            if not 0 < sum(lab) < n:
                continue
            draws = [rng.uniform(size=n) for _ in range(3)]
            draws += [np.round(d * 2) / 2 for d in draws]  # tied variants
            for s in draws:
                e = RankedEvaluation(s, np.array(lab, bool))
                sl = s.tolist()
                for f, o in ((average_precision, ap_oracle), (aupr, aupr_oracle), (auroc, auroc_oracle)):
                    a, b = f(e), float(o(sl, lab))
                    count += 1
                    identical += a == b
                    worst = max(worst, abs(a - b))
    elapsed = time.perf_counter() - t0
    ok = worst <= 4.5e-16 and elapsed < 30
    assert record(4, ok, f"{count} checks against exact rational oracles, {identical} bit-identical, "
                         f"max |diff| {worst:.1e} (float rounding), {elapsed:.1f}s (< 30s)")


def test_criterion_05_sparse_exact():
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in (5, 20, 35, 50):
        X, S, r = random_problem(rng, n, 3, 3)
        Xq, Sq, _ = random_problem(rng, 20, 3, 3)
        hp = random_hp(rng, 3, 3)
        me, ve = predict(fit_exact(hp, X, S, r), Xq, Sq)
        ms, vs = predict_sparse(fit_sparse(hp, X, S, r, P=n), Xq, Sq)
        worst = max(worst, np.abs(me - ms).max(), np.abs(ve - vs).max())
    assert record(5, worst < 1e-6, f"P = N in (5, 20, 35, 50), max |sparse - exact| {worst:.1e} (< 1e-6)")


def test_criterion_06_ap_error_direction(paper_bench, honest_bench):
    records, _, elapsed = paper_bench
    wins, detail = directional(records, "red", "mcp", "ap_error", strict=False)
    hw, hdetail = directional(honest_bench[0], "red", "mcp", "ap_error", strict=False)
    ok = wins >= 4 and elapsed < 15 * 60
    note(6, f"with validation-based selection: RED >= MCP on {hw}/5 "
         f"({'would pass' if hw >= 4 else 'would fail'}); {hdetail}")
    assert record(6, ok, f"RED AP-Error >= MCP on {wins}/5 datasets (need 4), benchmark {elapsed:.0f}s "
                         f"(< 900s); {detail}")


def test_criterion_07_adversarial(paper_bench, honest_bench):
    records = paper_bench[0]
    mcp_vals = [r.value("mcp", "ap_adversarial") for r in records if r.n_adversarial]
    mcp_exact = bool(mcp_vals) and all(v == 0.5 for v in mcp_vals)
    # the tie convention on a constructed batch: MCP tied at 1.0 on every adversarial row
    s = np.r_[np.linspace(0.4, 0.99, 25), np.ones(25)]
    adv = np.r_[np.zeros(25, bool), np.ones(25, bool)]
    ev = RankedEvaluation(-s, adv)
    synthetic = average_precision(ev) == 0.5 and aupr(ev) == 0.25
    wins, detail = directional(records, "red_variance", "mcp", "ap_adversarial", strict=True)
    hw, hdetail = directional(honest_bench[0], "red_variance", "mcp", "ap_adversarial", strict=True)
    note(7, f"with validation-based selection: RED-variance > MCP on {hw}/5 "
         f"({'would pass' if hw >= 4 else 'would fail'}); {hdetail}")
    ok = mcp_exact and synthetic and wins >= 4
    assert record(7, ok, f"MCP AP-Adversarial = 0.5 in all {len(mcp_vals)} runs: {mcp_exact}; constructed "
                         f"batch AP/AUPR = 0.5/0.25: {synthetic}; RED-variance > MCP on {wins}/5 "
                         f"(need 4); {detail}")


def test_criterion_08_ood(paper_bench, honest_bench):
    wins, detail = directional(paper_bench[0], "red_variance", "mcp", "ap_ood", strict=True)
    hw, hdetail = directional(honest_bench[0], "red_variance", "mcp", "ap_ood", strict=True)
    note(8, f"with validation-based selection: RED-variance > MCP on {hw}/5 "
         f"({'would pass' if hw >= 3 else 'would fail'}); {hdetail}")
    assert record(8, wins >= 3, f"RED-variance AP-OOD > MCP on {wins}/5 datasets (need 3); {detail}")


def test_criterion_09_stat_oracles():
    rng = np.random.default_rng(9)
    w_checks = w_equal = 0
    for n in range(2, 11):
        for _ in range(20):
            d = np.round(rng.normal(0.2, 1, n), 1)
            if not np.any(d != 0):
                continue
            w_checks += 1
            w_equal += wilcoxon_signed_rank(d, np.zeros(n)).pvalue == wilcoxon_enumeration(d)
    t_worst = 0.0
    for n in range(2, 31):
        a, b = rng.normal(size=n), rng.normal(0.3, 1, n)
        res = paired_t_test(a, b)
        t_worst = max(t_worst, abs(res.pvalue - t_pvalue_quadrature(res.statistic, n - 1)))
    ok = w_equal == w_checks and t_worst < 1e-6
    assert record(9, ok, f"Wilcoxon exact p equal to 2^n enumeration in {w_equal}/{w_checks} cases (n <= 10); "
                         f"t-test max |p - quadrature| {t_worst:.1e} (< 1e-6)")


def test_criterion_10_outputs_preserved(paper_bench, honest_bench):
    recs = paper_bench[0] + honest_bench[0]
    kept = sum(r.outputs_preserved for r in recs)
    assert record(10, kept == len(recs), f"classifier outputs byte-identical before and after detectors "
                                         f"in {kept}/{len(recs)} runs")


def test_criterion_11_determinism(paper_bench, tmp_path_factory):
    records, out1, _ = paper_bench
    cfg = bench_config(True)
    out2 = tmp_path_factory.mktemp("bench_paper_repeat")
    emit_report(run_benchmark(cfg), out2, cfg)
    files = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file() and p.name != "timing.json")
    other = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file() and p.name != "timing.json")
    same = files == other and all(filecmp.cmp(out1 / f, out2 / f, shallow=False) for f in files)
    assert record(11, same, f"repeated benchmark: {len(files)} report files byte-identical "
                            f"(timing.json excluded): {same}")
