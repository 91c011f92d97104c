"""ARD squared-exponential kernels over raw features and softmax outputs.

The I/O kernel is the sum of an input kernel on feature rows and an output
kernel that treats each softmax vector as a K-dimensional point. All
hyperparameter derivatives are taken with respect to log-parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class KernelHyperparams:
    input_signal_var: float
    input_lengthscales: np.ndarray
    output_signal_var: float
    output_lengthscales: np.ndarray
    noise_var: float
    output_kernel_enabled: bool = True

    def __post_init__(self):
        li = np.array(self.input_lengthscales, dtype=float).ravel()
        lo = np.array(self.output_lengthscales, dtype=float).ravel()
        li.setflags(write=False)
        lo.setflags(write=False)
        object.__setattr__(self, "input_lengthscales", li)
        object.__setattr__(self, "output_lengthscales", lo)
        for name in ("input_signal_var", "output_signal_var", "noise_var"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = np.concatenate([[self.input_signal_var, self.output_signal_var, self.noise_var], li, lo])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("kernel hyperparameters must be finite and strictly positive")

    @property
    def m(self) -> int:
        return self.input_lengthscales.size

    @property
    def k(self) -> int:
        return self.output_lengthscales.size

    @property
    def num_params(self) -> int:
        return self.m + self.k + 3

    def prior_variance(self) -> float:
        return self.input_signal_var + (self.output_signal_var if self.output_kernel_enabled else 0.0)

    # log-parameter layout: [s_in, l_in(M), s_out, l_out(K), noise]
    def to_log(self) -> np.ndarray:
        return np.log(np.concatenate([[self.input_signal_var], self.input_lengthscales,
                                      [self.output_signal_var], self.output_lengthscales,
                                      [self.noise_var]]))

    @classmethod
    def from_log(cls, theta, m: int, k: int, output_kernel_enabled: bool = True) -> "KernelHyperparams":
        p = np.exp(np.asarray(theta, dtype=float))
        if p.size != m + k + 3:
            raise ValueError(f"expected {m + k + 3} log-parameters, got {p.size}")
        return cls(p[0], p[1:1 + m], p[1 + m], p[2 + m:2 + m + k], p[-1], output_kernel_enabled)

    def param_names(self) -> list[str]:
        return (["input_signal_var"] + [f"input_lengthscale_{j}" for j in range(self.m)]
                + ["output_signal_var"] + [f"output_lengthscale_{j}" for j in range(self.k)]
                + ["noise_var"])

    def input_mask(self) -> np.ndarray:
        """Boolean mask of the log-parameters that exist with the output kernel off."""
        mask = np.zeros(self.num_params, dtype=bool)
        mask[:1 + self.m] = True
        mask[-1] = True
        return mask

    def replace(self, **kw) -> "KernelHyperparams":
        d = dict(input_signal_var=self.input_signal_var, input_lengthscales=self.input_lengthscales,
                 output_signal_var=self.output_signal_var, output_lengthscales=self.output_lengthscales,
                 noise_var=self.noise_var, output_kernel_enabled=self.output_kernel_enabled)
        d.update(kw)
        return KernelHyperparams(**d)

    def to_dict(self) -> dict:
        return {
            "input_signal_var": self.input_signal_var,
            "input_lengthscales": self.input_lengthscales.tolist(),
            "output_signal_var": self.output_signal_var,
            "output_lengthscales": self.output_lengthscales.tolist(),
            "noise_var": self.noise_var,
            "output_kernel_enabled": self.output_kernel_enabled,
        }

    @classmethod
    def from_dict(cls, d) -> "KernelHyperparams":
        return cls(d["input_signal_var"], d["input_lengthscales"], d["output_signal_var"],
                   d["output_lengthscales"], d["noise_var"], bool(d["output_kernel_enabled"]))


def rbf(a, b, signal_var: float, lengthscales) -> float:
    a, b, ls = (np.asarray(v, dtype=float) for v in (a, b, lengthscales))
    if a.shape != b.shape or a.shape != ls.shape:
        raise DataError("rbf: vectors and lengthscales must share one length")
    return float(signal_var * np.exp(-0.5 * np.sum(((a - b) / ls) ** 2)))


def ard_sqdist(A, B, lengthscales, same: bool = False) -> np.ndarray:
    """Squared distances after dividing each column by its lengthscale.

    Uses the |a|^2 + |b|^2 - 2ab expansion; tiny negatives from cancellation
    are clamped to zero and, for ``same=True``, the diagonal is set to 0.
    """
    As = np.asarray(A, dtype=float) / lengthscales
    Bs = As if same else np.asarray(B, dtype=float) / lengthscales
    with np.errstate(over="ignore", invalid="ignore"):  # extreme lengthscales; caller sees non-finite
        a2 = np.einsum("ij,ij->i", As, As)
        b2 = a2 if same else np.einsum("ij,ij->i", Bs, Bs)
        D = a2[:, None] + b2[None, :] - 2.0 * (As @ Bs.T)
    np.maximum(D, 0.0, out=D)
    if same:
        np.fill_diagonal(D, 0.0)
    return D


def rbf_matrix(A, B, signal_var: float, lengthscales, same: bool = False) -> np.ndarray:
    return signal_var * np.exp(-0.5 * ard_sqdist(A, B, lengthscales, same))


def _check(X, S, hp: KernelHyperparams):
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    if X.ndim != 2 or X.shape[1] != hp.m:
        raise DataError(f"expected {hp.m} feature columns, got shape {X.shape}")
    if S.ndim != 2 or S.shape[1] != hp.k:
        raise DataError(f"expected {hp.k} softmax columns, got shape {S.shape}")
    if X.shape[0] != S.shape[0]:
        raise DataError("feature and softmax blocks differ in row count")
    return X, S


def kernel_parts(Xa, Sa, Xb, Sb, hp: KernelHyperparams, same: bool = False):
    """(input part, output part or None) of the I/O kernel matrix."""
    Xa, Sa = _check(Xa, Sa, hp)
    if not same:
        Xb, Sb = _check(Xb, Sb, hp)
    Kin = rbf_matrix(Xa, Xb, hp.input_signal_var, hp.input_lengthscales, same)
    Kout = None
    if hp.output_kernel_enabled:
        Kout = rbf_matrix(Sa, Sb, hp.output_signal_var, hp.output_lengthscales, same)
    return Kin, Kout


def io_kernel_matrix(Xa, Sa, Xb, Sb, hp: KernelHyperparams) -> np.ndarray:
    same = Xb is Xa and Sb is Sa
    Kin, Kout = kernel_parts(Xa, Sa, Xb, Sb, hp, same)
    return Kin if Kout is None else Kin + Kout


def io_kernel_diag(n: int, hp: KernelHyperparams) -> np.ndarray:
    return np.full(n, hp.prior_variance())


def io_kernel_gradients(X, S, hp: KernelHyperparams) -> list[np.ndarray]:
    """dK/d(log theta) for every hyperparameter, in :meth:`KernelHyperparams.to_log`
    order. The noise entry is zero: noise is not part of the kernel matrix."""
    X, S = _check(X, S, hp)
    n = X.shape[0]
    Kin, Kout = kernel_parts(X, S, X, S, hp, same=True)
    grads = [Kin]
    for d in range(hp.m):
        diff = (X[:, d, None] - X[None, :, d]) / hp.input_lengthscales[d]
        grads.append(Kin * diff ** 2)
    zero = np.zeros((n, n))
    if Kout is None:
        grads.extend([zero] * (hp.k + 1))
    else:
        grads.append(Kout)
        for d in range(hp.k):
            diff = (S[:, d, None] - S[None, :, d]) / hp.output_lengthscales[d]
            grads.append(Kout * diff ** 2)
    grads.append(zero)
    return grads


def _weighted_sqdist_sums(MK, A, B, same: bool) -> np.ndarray:
    """For each column d: sum_ij MK_ij (A_id - B_jd)^2."""
    r = MK.sum(axis=1)
    if same:
        return 2.0 * (r @ (A * A)) - 2.0 * np.einsum("id,id->d", A, MK @ A)
    c = MK.sum(axis=0)
    return r @ (A * A) + c @ (B * B) - 2.0 * np.einsum("id,id->d", A, MK @ B)


def grad_contract(Xa, Sa, Xb, Sb, M, hp: KernelHyperparams, parts=None, same: bool = False) -> np.ndarray:
    """sum_ij M_ij dK_ij/d(log theta) for every kernel hyperparameter.

    Returns a vector in ``to_log`` order with the noise slot set to 0. This
    avoids materialising one N x N matrix per lengthscale. ``parts`` may carry
    precomputed ``kernel_parts`` output.
    """
    if parts is None:
        parts = kernel_parts(Xa, Sa, Xb, Sb, hp, same)
    Kin, Kout = parts
    g = np.zeros(hp.num_params)
    MK = M * Kin
    g[0] = MK.sum()
    li = hp.input_lengthscales
    Xa_s = np.asarray(Xa, float) / li
    Xb_s = Xa_s if same else np.asarray(Xb, float) / li
    g[1:1 + hp.m] = _weighted_sqdist_sums(MK, Xa_s, Xb_s, same)
    if Kout is not None:
        MK = M * Kout
        g[1 + hp.m] = MK.sum()
        lo = hp.output_lengthscales
        Sa_s = np.asarray(Sa, float) / lo
        Sb_s = Sa_s if same else np.asarray(Sb, float) / lo
        g[2 + hp.m:2 + hp.m + hp.k] = _weighted_sqdist_sums(MK, Sa_s, Sb_s, same)
    return g
