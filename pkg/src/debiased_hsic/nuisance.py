"""Kernel ridge regression nuisances.

Two first-stage objects are fit on each fold complement:

* the regression ``m`` of the labels on the covariates, via standard KRR
  with mean-centered labels, and
* the representer weights of the vector-valued KRR for the derivative-target
  nuisance ``v``. These weights do not depend on the regression targets at
  all; targets enter later through contractions with derivative Gram tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .kernels import KernelSpec, eval_gram


class SolverError(RuntimeError):
    pass


def solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with diagonal jitter escalation.

    Jitter starts at 1e-10 * trace(M)/N and grows tenfold up to
    1e-4 * trace(M)/N before giving up.
    """
    n = M.shape[0]
    base = max(np.trace(M) / n, np.finfo(np.float64).tiny)
    jitter = 0.0
    while True:
        try:
            c, low = cho_factor(M + jitter * np.eye(n), lower=True)
            return cho_solve((c, low), rhs)
        except LinAlgError:
            jitter = 1e-10 * base if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4 * base:
                raise SolverError("regularized kernel system is singular") from None


@dataclass(frozen=True)
class RidgeFit:
    """Fitted KRR: predictions are q(W_eval, W_train) @ alpha + label mean."""

    W_train: np.ndarray
    alpha: np.ndarray  # (N, d_y) dual coefficients for centered labels
    spec_q: KernelSpec
    lam: float
    label_mean: np.ndarray  # (d_y,)

    def predict(self, W_eval: np.ndarray) -> np.ndarray:
        Q = eval_gram(self.spec_q, np.atleast_2d(W_eval), self.W_train)
        return Q @ self.alpha + self.label_mean[None, :]


def fit_krr(W_train: np.ndarray, Y_train: np.ndarray, spec_q: KernelSpec, lam: float) -> RidgeFit:
    """Solve (Q + N lam I) alpha = Y - mean(Y)."""
    W_train = np.atleast_2d(np.asarray(W_train, dtype=np.float64))
    Y_train = np.asarray(Y_train, dtype=np.float64)
    if Y_train.ndim == 1:
        Y_train = Y_train[:, None]
    n = W_train.shape[0]
    if n < 2:
        raise ValueError("need at least two training rows")
    if lam <= 0:
        raise ValueError("ridge parameter must be positive")
    mean = Y_train.mean(axis=0)
    Q = eval_gram(spec_q, W_train, W_train)
    alpha = solve_spd(Q + n * lam * np.eye(n), Y_train - mean)
    return RidgeFit(W_train, alpha, spec_q, float(lam), mean)


@dataclass(frozen=True)
class VvkrrWeights:
    """Representer weights of the separable vector-valued KRR.

    ``weights[j, t, e]`` maps the t-th training target of coordinate j to the
    prediction at evaluation point e. For the centered variant each column
    sums to one, so constant targets are reproduced exactly.
    """

    weights: np.ndarray  # (d_y, N_train, N_eval)
    centered: bool
    lams: np.ndarray  # (d_y,)


def fit_vvkrr_weights(
    W_train: np.ndarray,
    W_eval: np.ndarray,
    spec_q: KernelSpec,
    lams: np.ndarray,
    centered: bool = True,
) -> VvkrrWeights:
    """Weights w_j(train, eval) = [(Q + N lam_j I)^{-1} q(., w_eval)]_train.

    The centered variant adds (1 - column sum)/N to every entry, which is the
    representer form of regressing mean-centered targets and adding the mean
    back.
    """
    W_train = np.atleast_2d(np.asarray(W_train, dtype=np.float64))
    W_eval = np.atleast_2d(np.asarray(W_eval, dtype=np.float64))
    lams = np.atleast_1d(np.asarray(lams, dtype=np.float64))
    if np.any(lams <= 0):
        raise ValueError("all ridge parameters must be positive")
    n = W_train.shape[0]
    Q = eval_gram(spec_q, W_train, W_train)
    q_eval = eval_gram(spec_q, W_train, W_eval)  # (N_train, N_eval)
    out = np.empty((lams.size, n, W_eval.shape[0]))
    eye = np.eye(n)
    for j, lam in enumerate(lams):
        if j > 0 and lam == lams[j - 1]:
            out[j] = out[j - 1]
            continue
        w = solve_spd(Q + n * lam * eye, q_eval)
        if centered:
            w = w + (1.0 - w.sum(axis=0))[None, :] / n
        out[j] = w
    return VvkrrWeights(out, centered, lams)


def _cv_splits(n: int, n_folds: int = 2):
    idx = np.arange(n)
    return [(np.concatenate([idx[f::n_folds] for f in range(n_folds) if f != v]), idx[v::n_folds])
            for v in range(n_folds)]


def select_hyperparams(
    W: np.ndarray,
    targets: np.ndarray,
    spec_q: KernelSpec,
    grid: np.ndarray,
) -> float:
    """Pick the ridge parameter minimizing 2-fold CV squared error.

    Ties break toward the larger value.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    grid = np.sort(np.atleast_1d(np.asarray(grid, dtype=np.float64)))
    if grid.size == 0:
        raise ValueError("empty hyperparameter grid")
    if grid.size == 1:
        return float(grid[0])
    if W.shape[0] < 4:
        raise ValueError("need at least 4 rows for internal cross-validation")
    errs = np.zeros(grid.size)
    for tr, va in _cv_splits(W.shape[0]):
        for g, lam in enumerate(grid):
            fit = fit_krr(W[tr], targets[tr], spec_q, lam)
            errs[g] += np.sum((fit.predict(W[va]) - targets[va]) ** 2)
    # argmin over reversed grid -> largest lam among ties
    best = grid.size - 1 - int(np.argmin(errs[::-1]))
    return float(grid[best])


def select_vv_lambda(
    W: np.ndarray,
    feature_gram: np.ndarray,
    spec_q: KernelSpec,
    grid: np.ndarray,
) -> float:
    """Ridge parameter for the vector-valued KRR by 2-fold CV.

    ``feature_gram[a, b]`` is the inner product of the a-th and b-th
    Hilbert-valued regression targets, so validation errors expand through
    the Gram matrix without materializing the targets. Ties break toward the
    larger value.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    G = np.asarray(feature_gram, dtype=np.float64)
    grid = np.sort(np.atleast_1d(np.asarray(grid, dtype=np.float64)))
    if grid.size == 0:
        raise ValueError("empty hyperparameter grid")
    if grid.size == 1:
        return float(grid[0])
    if W.shape[0] < 4:
        raise ValueError("need at least 4 rows for internal cross-validation")
    errs = np.zeros(grid.size)
    for tr, va in _cv_splits(W.shape[0]):
        Q_tt = eval_gram(spec_q, W[tr], W[tr])
        Q_tv = eval_gram(spec_q, W[tr], W[va])
        G_tt, G_tv = G[np.ix_(tr, tr)], G[np.ix_(tr, va)]
        eye = np.eye(tr.size)
        for g, lam in enumerate(grid):
            Om = solve_spd(Q_tt + tr.size * lam * eye, Q_tv)  # (n_tr, n_va)
            errs[g] += np.sum(Om * (G_tt @ Om)) - 2.0 * np.sum(Om * G_tv)
    best = grid.size - 1 - int(np.argmin(errs[::-1]))
    return float(grid[best])


def default_lambda_grid(n: int) -> np.ndarray:
    """Geometric grid {1e-6, ..., 1} scaled by 1/n."""
    return np.logspace(-6.0, 0.0, 7) / n
