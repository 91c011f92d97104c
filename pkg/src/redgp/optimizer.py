"""Multi-restart quasi-Newton maximisation of the GP marginal likelihood."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ._random import child_seeds, make_rng
from .errors import NumericalError
from .gp import choose_inducing, fit_exact, fit_sparse, lml_and_grad, sparse_bound_and_grad
from .kernel import KernelHyperparams

log = logging.getLogger(__name__)

GTOL = 1e-5
FTOL = 1e-9


@dataclass(frozen=True)
class RestartSchedule:
    num_restarts: int = 20
    staged_count: int = 10
    init_signal_var_range: tuple = (0.0, 1.0)
    init_lengthscale_range: tuple = (0.0, 10.0)
    init_noise_range: tuple = (1e-4, 1.0)
    max_iterations: int = 1000
    seed: int = 0
    output_kernel: bool = True  # False: input kernel only, no staging

    def __post_init__(self):
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be >= 1")
        if not 0 <= self.staged_count <= self.num_restarts:
            raise ValueError("staged_count must lie in [0, num_restarts]")
        for lo, hi in (self.init_signal_var_range, self.init_lengthscale_range, self.init_noise_range):
            if not (0 <= lo < hi):
                raise ValueError("initialization ranges must be non-empty and non-negative")

    @property
    def joint_count(self) -> int:
        return self.num_restarts - self.staged_count

    def kind(self, i: int) -> str:
        if not self.output_kernel:
            return "input_only"
        return "staged" if i < self.staged_count else "joint"


@dataclass
class PhaseReport:
    name: str
    initial_value: float
    final_value: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class RestartReport:
    index: int
    kind: str
    phases: list = field(default_factory=list)
    failed: bool = False
    error: str = ""

    @property
    def final_lml(self) -> float:
        return self.phases[-1].final_value if self.phases and not self.failed else float("nan")

    @property
    def iterations(self) -> int:
        return sum(p.iterations for p in self.phases)

    @property
    def converged(self) -> bool:
        return bool(self.phases) and not self.failed and all(p.converged for p in self.phases)


@dataclass
class FitReport:
    restarts: list
    completed: list  # restart indices that produced a model, aligned with the model list
    selected: list = field(default_factory=list)
    mode: str = "exact"
    inducing_indices: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "selected": list(self.selected),
            "completed": list(self.completed),
            "inducing_indices": self.inducing_indices,
            "restarts": [
                {"index": r.index, "kind": r.kind, "failed": r.failed, "error": r.error,
                 "final_lml": None if r.failed else r.final_lml, "iterations": r.iterations,
                 "converged": r.converged, "phases": [asdict(p) for p in r.phases]}
                for r in self.restarts
            ],
        }


def lbfgs_maximize(fun: Callable, x0, max_iter: int = 1000):
    """Maximise ``fun`` (returning ``(value, gradient)``) with L-BFGS.

    Non-finite evaluations during the line search are answered with a large
    penalty so the search backtracks. Returns ``(x, value, PhaseReport)``.
    """
    x0 = np.asarray(x0, dtype=float)
    f0, g0 = fun(x0)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise NumericalError("objective is not finite at the initial point")
    best = {"x": x0.copy(), "f": float(f0)}
    penalty = 1e10 + 1e3 * abs(f0)

    def neg(x):
        try:
            f, g = fun(x)
        except (NumericalError, np.linalg.LinAlgError, FloatingPointError):
            return penalty, np.zeros_like(x)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return penalty, np.zeros_like(x)
        if f > best["f"]:
            best["x"], best["f"] = x.copy(), float(f)
        return -f, -np.asarray(g, dtype=float)

    res = minimize(neg, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": FTOL, "gtol": GTOL, "maxcor": 10})
    x, f = best["x"], best["f"]
    xr = np.asarray(res.x, dtype=float)
    if np.isfinite(res.fun) and -res.fun >= f:
        x, f = xr, float(-res.fun)
    converged = bool(res.success) and res.nit < max_iter
    msg = res.message if isinstance(res.message, str) else str(res.message)
    return x, f, PhaseReport("", float(f0), f, int(res.nit), converged, msg)


def _draw_init(rng, m: int, k: int, sched: RestartSchedule) -> np.ndarray:
    def u(lo, hi, size=None):
        v = rng.uniform(lo, hi, size)
        while np.any(v == 0):  # log-space needs strictly positive draws
            v = np.where(v == 0, rng.uniform(lo, hi, np.shape(v)), v)
        return v

    s_in = u(*sched.init_signal_var_range)
    l_in = u(*sched.init_lengthscale_range, m)
    s_out = u(*sched.init_signal_var_range)
    l_out = u(*sched.init_lengthscale_range, k)
    noise = u(*sched.init_noise_range)
    return np.log(np.concatenate([[s_in], l_in, [s_out], l_out, [noise]]))


class _Objective:
    def __init__(self, X, S, r, mode, ZX=None, ZS=None):
        self.X, self.S, self.r, self.mode, self.ZX, self.ZS = X, S, r, mode, ZX, ZS
        self.m, self.k = X.shape[1], S.shape[1]

    def __call__(self, theta, enabled: bool):
        if not np.all(np.abs(theta) < 700):
            raise NumericalError("log-hyperparameter out of representable range")
        try:
            with np.errstate(over="raise", under="ignore"):
                hp = KernelHyperparams.from_log(theta, self.m, self.k, enabled)
        except (ValueError, FloatingPointError) as exc:
            raise NumericalError(str(exc)) from None
        if self.mode == "exact":
            return lml_and_grad(hp, self.X, self.S, self.r)
        return sparse_bound_and_grad(hp, self.X, self.S, self.r, self.ZX, self.ZS)

    def restricted(self, theta_full, mask, enabled):
        def f(x):
            th = theta_full.copy()
            th[mask] = x
            v, g = self(th, enabled)
            return v, g[mask]
        return f


def _run_restart(i, seed, obj: _Objective, sched: RestartSchedule):
    kind = sched.kind(i)
    rep = RestartReport(i, kind)
    rng = make_rng(seed)
    theta = _draw_init(rng, obj.m, obj.k, sched)
    n_par = theta.size
    input_mask = np.zeros(n_par, dtype=bool)
    input_mask[:1 + obj.m] = True
    input_mask[-1] = True
    try:
        if kind in ("staged", "input_only"):
            x, _, ph = lbfgs_maximize(obj.restricted(theta, input_mask, False), theta[input_mask],
                                      sched.max_iterations)
            ph.name = "input_only" if kind == "input_only" else "phase1_input"
            rep.phases.append(ph)
            theta[input_mask] = x
        if kind != "input_only":
            full = np.ones(n_par, dtype=bool)
            x, _, ph = lbfgs_maximize(obj.restricted(theta, full, True), theta, sched.max_iterations)
            ph.name = "phase2_joint" if kind == "staged" else "joint"
            rep.phases.append(ph)
            theta = x
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        rep.failed = True
        rep.error = str(exc)
        return rep, None
    enabled = kind != "input_only"
    return rep, KernelHyperparams.from_log(theta, obj.m, obj.k, enabled)


def multi_restart_fit(X, S, r, schedule: RestartSchedule = RestartSchedule(), mode: str = "exact",
                      inducing_count: int = 50):
    """Fit one GP per random restart. Failed restarts are recorded, not raised.

    Returns ``(models, report)`` where ``models[j]`` came from restart
    ``report.completed[j]``.
    """
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 training rows")
    if mode not in ("exact", "sparse"):
        raise ValueError(f"unknown mode {mode!r}")
    seeds = child_seeds(schedule.seed, schedule.num_restarts + 1)
    idx = None
    if mode == "sparse":
        idx = choose_inducing(r.size, min(inducing_count, r.size), seeds[-1])
        obj = _Objective(X, S, r, mode, X[idx], S[idx])
    else:
        obj = _Objective(X, S, r, mode)
    models, reports, completed = [], [], []
    for i in range(schedule.num_restarts):
        rep, hp = _run_restart(i, seeds[i], obj, schedule)
        if hp is not None:
            try:
                model = fit_exact(hp, X, S, r) if mode == "exact" else fit_sparse(hp, X, S, r, inducing_idx=idx)
            except NumericalError as exc:
                rep.failed, rep.error = True, str(exc)
            else:
                models.append(model)
                completed.append(i)
        reports.append(rep)
        log.debug("restart %d (%s): lml=%s iters=%d", i, rep.kind, rep.final_lml, rep.iterations)
    report = FitReport(reports, completed, mode=mode,
                       inducing_indices=None if idx is None else idx.tolist())
    if not models:
        raise NumericalError("all GP restarts failed")
    return models, report


def select_top(models: Sequence, scores, k: int = 3, lmls=None, indices=None) -> list[int]:
    """Positions of the ``k`` best models by score; ties go to the higher LML,
    then the lower restart index. NaN scores rank last."""
    n = len(models)
    if n == 0:
        raise ValueError("no models to select from")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    scores = np.asarray(scores, dtype=float)
    lmls = np.zeros(n) if lmls is None else np.asarray(lmls, dtype=float)
    indices = np.arange(n) if indices is None else np.asarray(indices)
    key = lambda j: (-(scores[j] if np.isfinite(scores[j]) else -np.inf),
                     -(lmls[j] if np.isfinite(lmls[j]) else -np.inf), indices[j])
    return sorted(range(n), key=key)[:k]
