"""Fold planning and per-fold nuisance fitting.

For every fold k the regression is trained on the complement of k and
evaluated at all n points, so residuals are available both at the held-out
evaluation rows and at the complement rows used for centering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .kernels import (
    KernelSpec,
    eval_mixed_gram,
    gaussian_spec,
    matern_spec,
    resolve_spec,
    resolve_spec_or_default,
)
from .nuisance import (
    VvkrrWeights,
    default_lambda_grid,
    fit_krr,
    fit_vvkrr_weights,
    select_hyperparams,
    select_vv_lambda,
)


def _as2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


@dataclass(frozen=True)
class Dataset:
    """Observations (x_i, w_i, y_i) with the covariate nested in w."""

    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", _as2d(self.X))
        object.__setattr__(self, "W", _as2d(self.W))
        object.__setattr__(self, "Y", _as2d(self.Y))
        n = self.X.shape[0]
        if self.W.shape[0] != n or self.Y.shape[0] != n:
            raise ValueError("X, W, Y must have the same number of rows")
        for name, a in (("X", self.X), ("W", self.W), ("Y", self.Y)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite entries in {name}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d_y(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class FoldPlan:
    K: int
    assignment: np.ndarray  # (n,) fold ids in 0..K-1
    seed: int

    @property
    def n(self) -> int:
        return self.assignment.size

    def fold_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def complement_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)


def make_folds(n: int, K: int, seed: int) -> FoldPlan:
    """Uniformly random balanced partition, deterministic given the seed."""
    if K < 2:
        raise ValueError("need at least two folds")
    if n < 2 * K:
        raise ValueError(f"n={n} too small for K={K} folds (need n >= 2K)")
    perm = rng.stream(seed, "folds").permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % K
    return FoldPlan(K, assignment, int(seed))


@dataclass(frozen=True)
class NuisanceConfig:
    """First-stage configuration shared by all folds.

    Bandwidth rules are resolved per fold complement for q and once, on the
    out-of-fold residuals, for the residual kernel l.
    """

    spec_q: KernelSpec = None
    spec_l: KernelSpec = None
    lambda_grid: np.ndarray | None = None
    centered_weights: bool = True

    def __post_init__(self):
        if self.spec_q is None:
            object.__setattr__(self, "spec_q", matern_spec())
        if self.spec_l is None:
            object.__setattr__(self, "spec_l", gaussian_spec())


@dataclass(frozen=True)
class FoldNuisance:
    """Per-fold regression predictions, residuals, and vvKRR weights.

    ``residuals[k]`` has shape (d_y, n): residual coordinates of every row
    under the regression trained without fold k. ``weights[k]`` holds the
    target-free representer weights with training points in the complement of
    fold k and evaluation points at all n rows.
    """

    plan: FoldPlan
    predictions: list[np.ndarray]  # K entries, each (n, d_y)
    residuals: list[np.ndarray]  # K entries, each (d_y, n)
    weights: list[VvkrrWeights]  # K entries, (d_y, n - n_k, n)
    spec_q_folds: list[KernelSpec]
    spec_l: KernelSpec
    lam_m: np.ndarray
    lam_v: np.ndarray

    def oof_residuals(self) -> np.ndarray:
        """(n, d_y) matrix of out-of-fold residuals xi_i = y_i - m^{-k(i)}(w_i)."""
        n = self.plan.n
        out = np.empty((n, self.residuals[0].shape[0]))
        for k in range(self.plan.K):
            rows = self.plan.fold_rows(k)
            out[rows] = self.residuals[k][:, rows].T
        return out


def fit_fold_regressions(
    data: Dataset, plan: FoldPlan, cfg: NuisanceConfig | None = None
) -> tuple[list[np.ndarray], list[np.ndarray], list[KernelSpec], np.ndarray]:
    """Fit the regression m on every fold complement, evaluated at all rows.

    Returns (predictions, residuals, per-fold kernel specs, selected ridges);
    ``residuals[k]`` has shape (d_y, n).
    """
    cfg = cfg or NuisanceConfig()
    if plan.n != data.n:
        raise ValueError("fold plan does not match dataset size")
    predictions, residuals, spec_q_folds, lam_m = [], [], [], []
    for k in range(plan.K):
        C = plan.complement_rows(k)
        spec_q_k = resolve_spec(cfg.spec_q, data.W[C])
        grid = cfg.lambda_grid if cfg.lambda_grid is not None else default_lambda_grid(C.size)
        lam = select_hyperparams(data.W[C], data.Y[C], spec_q_k, grid)
        fit = fit_krr(data.W[C], data.Y[C], spec_q_k, lam)
        pred = fit.predict(data.W)
        predictions.append(pred)
        residuals.append((data.Y - pred).T.copy())
        spec_q_folds.append(spec_q_k)
        lam_m.append(lam)
    return predictions, residuals, spec_q_folds, np.asarray(lam_m)


def fit_fold_nuisances(data: Dataset, plan: FoldPlan, cfg: NuisanceConfig | None = None) -> FoldNuisance:
    """Fit m and the vvKRR weights on every fold complement.

    Hyperparameters are selected by internal 2-fold CV within each complement.
    The vvKRR ridge is selected on the first label coordinate and shared
    across coordinates.
    """
    cfg = cfg or NuisanceConfig()
    if plan.n != data.n:
        raise ValueError("fold plan does not match dataset size")
    n, d_y = data.n, data.d_y
    K = plan.K

    predictions, residuals, spec_q_folds, lam_m = fit_fold_regressions(data, plan, cfg)

    # one residual-kernel bandwidth, shared by every fold pair
    oof = np.empty((n, d_y))
    for k in range(K):
        rows = plan.fold_rows(k)
        oof[rows] = residuals[k][:, rows].T
    spec_l = resolve_spec_or_default(cfg.spec_l, oof)

    weights, lam_v = [], []
    for k in range(K):
        C = plan.complement_rows(k)
        grid = cfg.lambda_grid if cfg.lambda_grid is not None else default_lambda_grid(C.size)
        xi_C = residuals[k][:, C].T  # (n - n_k, d_y)
        feature_gram = eval_mixed_gram(spec_l, xi_C, xi_C)[0, 0]
        lam = select_vv_lambda(data.W[C], feature_gram, spec_q_folds[k], grid)
        w = fit_vvkrr_weights(
            data.W[C], data.W, spec_q_folds[k], np.full(d_y, lam), cfg.centered_weights
        )
        weights.append(w)
        lam_v.append(lam)

    return FoldNuisance(
        plan=plan,
        predictions=predictions,
        residuals=residuals,
        weights=weights,
        spec_q_folds=spec_q_folds,
        spec_l=spec_l,
        lam_m=lam_m,
        lam_v=np.asarray(lam_v),
    )
