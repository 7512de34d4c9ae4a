"""Gaussian-process regression with a squared-exponential ARD kernel.

Hyperparameters are fitted by maximizing the log marginal likelihood with a
bounded Nelder-Mead search in log space (no gradients needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize

JITTER_START = 1e-8
JITTER_MAX = 1e-2
SCALE_FLOOR = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


class GPNumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class KernelParams:
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if not (np.all(np.isfinite(ls)) and np.all(ls > 0)):
            raise ValueError("lengthscales must be finite and positive")
        if not (math.isfinite(self.signal_var) and self.signal_var > 0):
            raise ValueError("signal_var must be finite and positive")
        if not (math.isfinite(self.noise_var) and self.noise_var >= 0):
            raise ValueError("noise_var must be finite and non-negative")

    def to_log(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscales), [math.log(self.signal_var), math.log(self.noise_var)]])

    @classmethod
    def from_log(cls, v) -> "KernelParams":
        v = np.asarray(v, dtype=float)
        return cls(np.exp(v[:-2]), float(np.exp(v[-2])), float(np.exp(v[-1])))


@dataclass(frozen=True)
class HyperBounds:
    lengthscale: tuple = (1e-2, 1e1)
    signal_var: tuple = (1e-2, 1e2)
    noise_var: tuple = (1e-8, 1.0)

    def log_box(self, d: int) -> list[tuple]:
        ls = (math.log(self.lengthscale[0]), math.log(self.lengthscale[1]))
        return [ls] * d + [
            (math.log(self.signal_var[0]), math.log(self.signal_var[1])),
            (math.log(self.noise_var[0]), math.log(self.noise_var[1])),
        ]


def kernel(x1, x2, params: KernelParams) -> float:
    d = (np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)) / params.lengthscales
    return float(params.signal_var * math.exp(-0.5 * float(d @ d)))


def kernel_matrix(X1, X2, params: KernelParams) -> np.ndarray:
    A = np.atleast_2d(X1) / params.lengthscales
    B = np.atleast_2d(X2) / params.lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return params.signal_var * np.exp(-0.5 * sq)


def _factor(K: np.ndarray, jitter: float = JITTER_START) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + jitter*I, escalating jitter by 10x on failure."""
    n = K.shape[0]
    j = jitter
    while True:
        try:
            L = cholesky(K + j * np.eye(n), lower=True, check_finite=True)
            return L, j
        except (np.linalg.LinAlgError, ValueError):
            pass
        if j >= JITTER_MAX:
            raise GPNumericalError(f"Cholesky failed with jitter up to {JITTER_MAX}")
        j = JITTER_START if j <= 0 else min(j * 10.0, JITTER_MAX)


def log_marginal_likelihood(X, y, params: KernelParams, jitter: float = JITTER_START) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    K = kernel_matrix(X, X, params) + params.noise_var * np.eye(n)
    L, _ = _factor(K, jitter)
    a = solve_triangular(L, y, lower=True)
    return float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * n * LOG_2PI)


@dataclass(frozen=True)
class GPModel:
    X: np.ndarray
    y: np.ndarray           # raw targets
    y_mean: float
    y_scale: float
    params: KernelParams
    chol: np.ndarray
    alpha: np.ndarray       # (K + noise I)^-1 standardized targets
    jitter: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @classmethod
    def build(cls, X, y, params: KernelParams, standardize: bool = True) -> "GPModel":
        """Condition a GP with fixed hyperparameters on (X, y)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.shape[0] or y.shape[0] < 1:
            raise ValueError("need matching, non-empty X and y")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("GP training data must be finite")
        if standardize:
            mean = float(y.mean())
            scale = max(float(y.std()), SCALE_FLOOR)
        else:
            mean, scale = 0.0, 1.0
        ys = (y - mean) / scale
        K = kernel_matrix(X, X, params) + params.noise_var * np.eye(len(y))
        L, jit = _factor(K)
        alpha = solve_triangular(L.T, solve_triangular(L, ys, lower=True), lower=False)
        return cls(X, y, mean, scale, params, L, alpha, jit)

    def predict(self, Xs, standardized: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at the rows of ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = kernel_matrix(Xs, self.X, self.params)
        mu = Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True)
        var = np.maximum(self.params.signal_var - (v * v).sum(0), 0.0)
        if standardized:
            return mu, var
        return self.y_mean + self.y_scale * mu, var * self.y_scale ** 2


def gp_posterior(model: GPModel, x) -> tuple[float, float]:
    mu, var = model.predict(np.asarray(x, dtype=float)[None, :])
    return float(mu[0]), float(var[0])


def gp_fit(X, y, bounds: Optional[HyperBounds] = None, restarts: int = 2,
           rng: Optional[np.random.Generator] = None, maxfev: int = 200) -> GPModel:
    """Fit hyperparameters by maximizing the marginal likelihood of standardized targets.

    Starts: one heuristic point (lengthscales 0.5, signal 1, noise 1e-4) and
    ``restarts`` uniform draws in the log box. Each start runs bounded
    Nelder-Mead for at most ``maxfev`` likelihood evaluations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError("need matching, non-empty X and y")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("GP training data must be finite")
    bounds = bounds or HyperBounds()
    rng = rng if rng is not None else np.random.default_rng(0)
    d = X.shape[1]
    box = bounds.log_box(d)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    ys = (y - y.mean()) / max(float(y.std()), SCALE_FLOOR)
    sqdist = (X[:, None, :] - X[None, :, :]) ** 2
    eye = np.eye(len(y))

    def neg_lml(v):
        # same quantity as log_marginal_likelihood, without per-call validation
        K = math.exp(v[-2]) * np.exp(-0.5 * sqdist @ np.exp(-2.0 * v[:-2]))
        K += (math.exp(v[-1]) + JITTER_START) * eye
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            try:
                L, _ = _factor(K - JITTER_START * eye, JITTER_START * 10.0)
            except GPNumericalError:
                return 1e25
        a = solve_triangular(L, ys, lower=True, check_finite=False)
        return float(0.5 * a @ a + np.log(np.diag(L)).sum() + 0.5 * len(ys) * LOG_2PI)

    heuristic = np.clip(KernelParams(np.full(d, 0.5), 1.0, 1e-4).to_log(), lo, hi)
    starts = [heuristic] + [rng.uniform(lo, hi) for _ in range(restarts)]
    best_v, best_f = heuristic, neg_lml(heuristic)
    for s in starts:
        res = minimize(neg_lml, s, method="Nelder-Mead", bounds=box,
                       options={"maxfev": maxfev, "xatol": 1e-4, "fatol": 1e-8})
        v = np.clip(res.x, lo, hi)
        f = neg_lml(v)
        if f < best_f:
            best_v, best_f = v, f
    return GPModel.build(X, y, KernelParams.from_log(best_v))
