"""Gaussian-process regression on residuals.

Exact mode factors ``K_c + noise*I`` with a Cholesky decomposition. Sparse
mode is the collapsed (Titsias) inducing-point approximation with inducing
inputs fixed to a seeded subset of the training rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack, solve_triangular

from ._random import make_rng
from .errors import ConfigError, DataError, FactorizationError
from .kernel import KernelHyperparams, grad_contract, io_kernel_matrix, kernel_parts

LOG_2PI = math.log(2.0 * math.pi)
EXACT_LIMIT = 4000
JITTER_START = 1e-8
JITTER_MAX = 1e-2


def cholesky_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A``, adding diagonal jitter on failure.

    Jitter starts at 1e-8 x mean diagonal and grows tenfold per retry up to
    1e-2 x mean diagonal. Returns ``(L, jitter)``.
    """
    if not np.all(np.isfinite(A)):
        raise FactorizationError("matrix has non-finite entries")
    scale = float(np.mean(np.diag(A)))
    jitter, factor = 0.0, JITTER_START
    while True:
        M = A if jitter == 0.0 else A + jitter * np.eye(A.shape[0])
        L, info = lapack.dpotrf(M, lower=1, clean=1)
        if info == 0:
            return L, jitter
        if factor > JITTER_MAX * (1 + 1e-9):
            raise FactorizationError(f"Cholesky failed with jitter up to {jitter:.3g}")
        jitter = factor * scale
        factor *= 10.0


def _chol_inverse(L: np.ndarray) -> np.ndarray:
    Ci, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise FactorizationError("inverse from Cholesky factor failed")
    return np.tril(Ci) + np.tril(Ci, -1).T


def _cho_solve(L, b):
    x, info = lapack.dpotrs(L, b, lower=1)
    if info != 0:
        raise FactorizationError("triangular solve failed")
    return x


def _as_arrays(X, S, r=None):
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    if r is None:
        return X, S
    r = np.asarray(r, dtype=float).ravel()
    if X.shape[0] != r.size or S.shape[0] != r.size:
        raise DataError("X, S and r must have the same number of rows")
    if r.size < 1:
        raise DataError("need at least one training row")
    return X, S, r


@dataclass(frozen=True)
class GpModel:
    hp: KernelHyperparams
    train_X: np.ndarray
    train_S: np.ndarray
    targets_r: np.ndarray
    chol_factor: np.ndarray
    alpha: np.ndarray
    jitter_used: float
    lml: float

    @property
    def n(self) -> int:
        return self.targets_r.size

    def predict(self, Xq, Sq, include_noise: bool = False):
        return predict(self, Xq, Sq, include_noise)

    def loo_mean(self) -> np.ndarray:
        """Leave-one-out predictive means at the training rows."""
        Ci = _chol_inverse(self.chol_factor)
        return self.targets_r - self.alpha / np.diag(Ci)

    def to_dict(self) -> dict:
        return {"kind": "exact", "hp": self.hp.to_dict(), "train_X": self.train_X.tolist(),
                "train_S": self.train_S.tolist(), "targets_r": self.targets_r.tolist(),
                "alpha": self.alpha.tolist(), "jitter_used": self.jitter_used, "lml": self.lml}

    @classmethod
    def from_dict(cls, d) -> "GpModel":
        hp = KernelHyperparams.from_dict(d["hp"])
        model = fit_exact(hp, d["train_X"], d["train_S"], d["targets_r"])
        stored = np.asarray(d["alpha"], dtype=float)
        if not np.allclose(model.alpha, stored, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(stored).max())):
            raise DataError("stored GP weights do not match the refactored model")
        return model


def _factor(hp, X, S):
    Kc = io_kernel_matrix(X, S, X, S, hp)
    n = Kc.shape[0]
    C = Kc + hp.noise_var * np.eye(n)
    L, jitter = cholesky_jitter(C)
    return L, jitter


def _lml_from_factor(L, alpha, r):
    n = r.size
    return float(-0.5 * r @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def fit_exact(hp: KernelHyperparams, X, S, r, limit: int = EXACT_LIMIT) -> GpModel:
    X, S, r = _as_arrays(X, S, r)
    if r.size > limit:
        raise ConfigError(f"N={r.size} exceeds the exact-GP limit {limit}; use sparse mode")
    L, jitter = _factor(hp, X, S)
    alpha = _cho_solve(L, r)
    return GpModel(hp, X, S, r, L, alpha, jitter, _lml_from_factor(L, alpha, r))


def log_marginal_likelihood(hp: KernelHyperparams, X, S, r) -> float:
    X, S, r = _as_arrays(X, S, r)
    L, _ = _factor(hp, X, S)
    return _lml_from_factor(L, _cho_solve(L, r), r)


def lml_and_grad(hp: KernelHyperparams, X, S, r):
    """LML and its gradient with respect to the log-hyperparameters."""
    X, S, r = _as_arrays(X, S, r)
    parts = kernel_parts(X, S, X, S, hp, same=True)
    Kc = parts[0] if parts[1] is None else parts[0] + parts[1]
    n = r.size
    L, _ = cholesky_jitter(Kc + hp.noise_var * np.eye(n))
    alpha = _cho_solve(L, r)
    lml = _lml_from_factor(L, alpha, r)
    W = np.outer(alpha, alpha) - _chol_inverse(L)
    g = 0.5 * grad_contract(X, S, X, S, W, hp, parts=parts, same=True)
    g[-1] = 0.5 * hp.noise_var * np.trace(W)
    return lml, g


def lml_gradient(hp: KernelHyperparams, X, S, r) -> np.ndarray:
    return lml_and_grad(hp, X, S, r)[1]


def predict(model: GpModel, Xq, Sq, include_noise: bool = False):
    """Predictive mean and variance of the residual at query rows.

    The variance is the latent-function variance; pass ``include_noise`` to
    add the observation noise.
    """
    Xq, Sq = _as_arrays(np.atleast_2d(Xq), np.atleast_2d(Sq))
    hp = model.hp
    Kq = io_kernel_matrix(Xq, Sq, model.train_X, model.train_S, hp)
    mean = Kq @ model.alpha
    V = solve_triangular(model.chol_factor, Kq.T, lower=True, check_finite=False)
    prior = hp.prior_variance()
    var = np.clip(prior - np.einsum("ij,ij->j", V, V), 0.0, prior)
    if include_noise:
        var = var + hp.noise_var
    return mean, var


# -- sparse (collapsed inducing-point) approximation -------------------------

def choose_inducing(n: int, p: int, seed: int) -> np.ndarray:
    if not 1 <= p <= n:
        raise ConfigError(f"inducing count must lie in [1, {n}], got {p}")
    if p == n:
        return np.arange(n)
    return np.sort(make_rng(seed).choice(n, size=p, replace=False))


@dataclass(frozen=True)
class SparseGpModel:
    hp: KernelHyperparams
    inducing_X: np.ndarray
    inducing_S: np.ndarray
    inducing_idx: np.ndarray
    Luu: np.ndarray
    LB: np.ndarray
    c: np.ndarray
    jitter_used: float
    lml: float  # collapsed lower bound on the LML
    loo: Optional[np.ndarray] = None

    @property
    def P(self) -> int:
        return self.inducing_idx.size

    def predict(self, Xq, Sq, include_noise: bool = False):
        return predict_sparse(self, Xq, Sq, include_noise)

    def loo_mean(self) -> np.ndarray:
        return self.loo

    def to_dict(self) -> dict:
        raise NotImplementedError("sparse models are rebuilt from their training data")


def _sparse_core(hp, X, S, r, ZX, ZS):
    n, p = r.size, ZX.shape[0]
    s2 = hp.noise_var
    uu = kernel_parts(ZX, ZS, ZX, ZS, hp, same=True)
    uf = kernel_parts(ZX, ZS, X, S, hp)
    Kuu = uu[0] if uu[1] is None else uu[0] + uu[1]
    Kuf = uf[0] if uf[1] is None else uf[0] + uf[1]
    Luu, jitter = cholesky_jitter(Kuu)
    V = solve_triangular(Luu, Kuf, lower=True, check_finite=False)
    B = np.eye(p) + (V @ V.T) / s2
    LB, _ = cholesky_jitter(B)
    Vr = V @ r
    c = solve_triangular(LB, Vr, lower=True, check_finite=False) / s2
    kdiag = hp.prior_variance()
    trQ = float(np.einsum("ij,ij->", V, V))
    bound = (-0.5 * n * LOG_2PI - np.sum(np.log(np.diag(LB))) - 0.5 * n * math.log(s2)
             - 0.5 * (r @ r) / s2 + 0.5 * (c @ c) - 0.5 * (n * kdiag - trQ) / s2)
    return dict(uu=uu, uf=uf, Luu=Luu, jitter=jitter, V=V, B=B, LB=LB, c=c, trQ=trQ,
                kdiag=kdiag, bound=float(bound))


def sparse_bound_and_grad(hp: KernelHyperparams, X, S, r, ZX, ZS):
    """Collapsed variational bound and its log-hyperparameter gradient."""
    X, S, r = _as_arrays(X, S, r)
    ZX, ZS = _as_arrays(ZX, ZS)
    core = _sparse_core(hp, X, S, r, ZX, ZS)
    n, p, s2 = r.size, ZX.shape[0], hp.noise_var
    V, LB, Luu, c = core["V"], core["LB"], core["Luu"], core["c"]
    # alpha = C^-1 r with C = Q + s2 I
    t = solve_triangular(LB, c, lower=True, trans=1, check_finite=False)
    alpha = (r - V.T @ t) / s2
    beta = solve_triangular(Luu, V @ alpha, lower=True, trans=1, check_finite=False)
    Binv = _chol_inverse(LB)
    Luu_inv = solve_triangular(Luu, np.eye(p), lower=True, check_finite=False)
    E = (np.eye(p) - Binv) @ Luu_inv
    M_fu = np.outer(alpha, beta) + (V.T @ E) / s2
    inner = core["B"] - 2.0 * np.eye(p) + Binv
    M_uu = -0.5 * (np.outer(beta, beta) + Luu_inv.T @ inner @ Luu_inv)
    g = grad_contract(ZX, ZS, X, S, M_fu.T, hp, parts=core["uf"])
    g += grad_contract(ZX, ZS, ZX, ZS, M_uu, hp, parts=core["uu"], same=True)
    # explicit dependence of the trace term on the prior variance
    g[0] += -0.5 * n / s2 * hp.input_signal_var
    if hp.output_kernel_enabled:
        g[1 + hp.m] += -0.5 * n / s2 * hp.output_signal_var
    trCinv = n / s2 - (p - np.trace(Binv)) / s2
    trW = alpha @ alpha - trCinv
    g[-1] = s2 * (0.5 * trW + 0.5 * (n * core["kdiag"] - core["trQ"]) / s2 ** 2)
    return core["bound"], g


def fit_sparse(hp: KernelHyperparams, X, S, r, P: int = 50, seed: int = 0,
               inducing_idx=None) -> SparseGpModel:
    X, S, r = _as_arrays(X, S, r)
    idx = choose_inducing(r.size, P, seed) if inducing_idx is None else np.asarray(inducing_idx)
    ZX, ZS = X[idx], S[idx]
    core = _sparse_core(hp, X, S, r, ZX, ZS)
    s2 = hp.noise_var
    W = solve_triangular(core["LB"], core["V"], lower=True, check_finite=False)
    t = solve_triangular(core["LB"], core["c"], lower=True, trans=1, check_finite=False)
    alpha = (r - core["V"].T @ t) / s2
    cinv_diag = (1.0 - np.einsum("ij,ij->j", W, W) / s2) / s2
    loo = r - alpha / cinv_diag
    return SparseGpModel(hp, ZX, ZS, idx, core["Luu"], core["LB"], core["c"], core["jitter"],
                         core["bound"], loo)


def predict_sparse(model: SparseGpModel, Xq, Sq, include_noise: bool = False):
    Xq, Sq = _as_arrays(np.atleast_2d(Xq), np.atleast_2d(Sq))
    hp = model.hp
    Kus = io_kernel_matrix(model.inducing_X, model.inducing_S, Xq, Sq, hp)
    v = solve_triangular(model.Luu, Kus, lower=True, check_finite=False)
    w = solve_triangular(model.LB, v, lower=True, check_finite=False)
    mean = w.T @ model.c
    prior = hp.prior_variance()
    var = prior - np.einsum("ij,ij->j", v, v) + np.einsum("ij,ij->j", w, w)
    var = np.clip(var, 0.0, prior)
    if include_noise:
        var = var + hp.noise_var
    return mean, var
