"""Plug-in residual permutation tests.

Two baselines: a split-sample variant (fit the regression on one part, test
on the other) and a full-sample cross-fitted variant using out-of-fold
residuals. Both permute the residual Gram rows/columns jointly against the
covariate Gram, with kernels and bandwidths fixed at their observed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .crossfit import Dataset, NuisanceConfig, fit_fold_regressions, make_folds
from .kernels import KernelSpec, eval_gram, gaussian_spec, resolve_spec, resolve_spec_or_default
from .nuisance import default_lambda_grid, fit_krr, select_hyperparams


def _center(M: np.ndarray) -> np.ndarray:
    """Doubly center: subtract row and column means, add the grand mean."""
    return M - M.mean(axis=0, keepdims=True) - M.mean(axis=1, keepdims=True) + M.mean()


def plugin_hsic_stat(K_gram: np.ndarray, L_gram: np.ndarray) -> float:
    """Biased (V-statistic) plug-in: n^-2 trace of the doubly centered product."""
    if K_gram.shape != L_gram.shape or K_gram.shape[0] != K_gram.shape[1]:
        raise ValueError("Gram matrices must be square with matching shapes")
    n = K_gram.shape[0]
    return float(np.sum(_center(K_gram) * _center(L_gram))) / (n * n)


def hsic_u_stat(K_gram: np.ndarray, L_gram: np.ndarray) -> float:
    """Unbiased (U-statistic) plug-in, valid for n >= 4."""
    n = K_gram.shape[0]
    if n < 4:
        raise ValueError("unbiased statistic needs n >= 4")
    Kt = K_gram - np.diag(np.diag(K_gram))
    Lt = L_gram - np.diag(np.diag(L_gram))
    term1 = float(np.sum(Kt * Lt))
    term2 = float(Kt.sum()) * float(Lt.sum()) / ((n - 1) * (n - 2))
    term3 = 2.0 / (n - 2) * float(Kt.sum(axis=0) @ Lt.sum(axis=1))
    return (term1 + term2 - term3) / (n * (n - 3))


def mmd2_u_stat(K_xx: np.ndarray, K_yy: np.ndarray, K_xy: np.ndarray) -> float:
    """Unbiased squared maximum mean discrepancy between two samples."""
    m, n = K_xx.shape[0], K_yy.shape[0]
    if m < 2 or n < 2:
        raise ValueError("both samples need at least two points")
    within_x = (K_xx.sum() - np.trace(K_xx)) / (m * (m - 1))
    within_y = (K_yy.sum() - np.trace(K_yy)) / (n * (n - 1))
    return float(within_x + within_y - 2.0 * K_xy.mean())


@dataclass(frozen=True)
class PermutationResult:
    """Observed plug-in statistic against its joint-permutation null."""

    observed: float
    permuted: np.ndarray  # (B_perm,)
    p_value: float
    reject: bool
    alpha: float

    def __post_init__(self):
        B = self.permuted.size
        lo, hi = 1.0 / (B + 1), 1.0
        if not lo - 1e-12 <= self.p_value <= hi + 1e-12:
            raise ValueError("p-value outside the attainable range")


def _permutation_test(
    K_gram: np.ndarray,
    L_gram: np.ndarray,
    B_perm: int,
    alpha: float,
    seed: int,
) -> PermutationResult:
    n = K_gram.shape[0]
    Kc, Lc = _center(K_gram), _center(L_gram)
    observed = float(np.sum(Kc * Lc)) / (n * n)
    permuted = np.empty(B_perm)
    for b in range(B_perm):
        p = rng.stream(seed, "perm", b).permutation(n)
        permuted[b] = float(np.sum(Kc * Lc[np.ix_(p, p)])) / (n * n)
    p_value = (1.0 + float(np.sum(permuted >= observed))) / (B_perm + 1.0)
    return PermutationResult(observed, permuted, p_value, p_value <= alpha, float(alpha))


def split_fit_test(
    data: Dataset,
    train_fraction: float = 0.5,
    B_perm: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    spec_k: KernelSpec | None = None,
    spec_q: KernelSpec | None = None,
    spec_l: KernelSpec | None = None,
) -> PermutationResult:
    """Fit the regression on a random train split; permutation-test the
    held-out residuals against the held-out covariates."""
    n = data.n
    n_train = int(round(train_fraction * n))
    if n_train < 10 or n - n_train < 10:
        raise ValueError("both split parts need at least 10 rows")
    perm = rng.stream(seed, "split").permutation(n)
    tr, te = perm[:n_train], perm[n_train:]

    cfg = NuisanceConfig(spec_q=spec_q, spec_l=spec_l)
    spec_q_r = resolve_spec(cfg.spec_q, data.W[tr])
    lam = select_hyperparams(data.W[tr], data.Y[tr], spec_q_r, default_lambda_grid(tr.size))
    fit = fit_krr(data.W[tr], data.Y[tr], spec_q_r, lam)
    resid = data.Y[te] - fit.predict(data.W[te])

    spec_k_r = resolve_spec(spec_k if spec_k is not None else gaussian_spec(), data.X[te])
    spec_l_r = resolve_spec_or_default(cfg.spec_l, resid)
    K_gram = eval_gram(spec_k_r, data.X[te], data.X[te])
    L_gram = eval_gram(spec_l_r, resid, resid)
    return _permutation_test(K_gram, L_gram, B_perm, alpha, seed)


def crossfit_permutation_test(
    data: Dataset,
    K: int = 5,
    B_perm: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    spec_k: KernelSpec | None = None,
    spec_q: KernelSpec | None = None,
    spec_l: KernelSpec | None = None,
) -> PermutationResult:
    """Full-sample permutation test on (X, out-of-fold residual) Grams."""
    plan = make_folds(data.n, K, seed)
    cfg = NuisanceConfig(spec_q=spec_q, spec_l=spec_l)
    _, residuals, _, _ = fit_fold_regressions(data, plan, cfg)
    oof = np.empty((data.n, data.d_y))
    for k in range(K):
        rows = plan.fold_rows(k)
        oof[rows] = residuals[k][:, rows].T

    spec_k_r = resolve_spec(spec_k if spec_k is not None else gaussian_spec(), data.X)
    spec_l_r = resolve_spec_or_default(cfg.spec_l, oof)
    K_gram = eval_gram(spec_k_r, data.X, data.X)
    L_gram = eval_gram(spec_l_r, oof, oof)
    return _permutation_test(K_gram, L_gram, B_perm, alpha, seed)
