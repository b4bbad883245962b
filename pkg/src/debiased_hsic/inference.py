"""Bootstrap calibration, confidence intervals, and the independence test.

All quantities are functions of the assembled Gram matrix G; nuisances are
never refitted inside bootstrap draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import norm

from . import rng
from .crossfit import Dataset, FoldPlan, NuisanceConfig, fit_fold_nuisances, make_folds


class DiagnosticUndefined(ValueError):
    """Raised when sigma-hat is zero; the delta CI is untrustworthy."""


def bootstrap_multiplicities(plan: FoldPlan, B: int, seed: int) -> np.ndarray:
    """(B, n) integer matrix; row b counts how often each observation appears
    in the within-fold resample of draw b."""
    n = plan.n
    counts = np.empty((B, n), dtype=np.int64)
    fold_rows = [plan.fold_rows(k) for k in range(plan.K)]
    for b in range(B):
        g = rng.stream(seed, "bootstrap", b)
        for rows in fold_rows:
            counts[b, rows] = g.multinomial(rows.size, np.full(rows.size, 1.0 / rows.size))
    return counts


def bootstrap_norms(G: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Squared norms ||H^(b)||^2 = n^-1 sum (N_i - 1)(N_j - 1) G_ij per draw."""
    M = mult.astype(np.float64) - 1.0
    return np.einsum("bi,bi->b", M @ G, M) / G.shape[0]


def bootstrap_quantile(
    G: np.ndarray,
    plan: FoldPlan,
    B: int,
    alpha: float,
    seed: int,
    allow_small_B: bool = False,
) -> tuple[float, np.ndarray]:
    """Bootstrap (1-alpha)-quantile of the resampled squared norm.

    Returns (zeta, all B squared norms). The quantile is the ceil((1-alpha)B)
    order statistic.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if B < 100 and not allow_small_B:
        raise ValueError("B < 100 is statistically meaningless; pass allow_small_B=True to override")
    vals = bootstrap_norms(G, bootstrap_multiplicities(plan, B, seed))
    order = math.ceil((1.0 - alpha) * B)
    zeta = float(np.sort(vals)[order - 1])
    return zeta, vals


def triangle_ci(q_v: float, zeta: float, n: int) -> tuple[float, float]:
    """Conservative interval for the operator norm via the reverse triangle
    inequality: [max(sqrt(Q_V) - sqrt(zeta/n), 0), sqrt(Q_V) + sqrt(zeta/n)]."""
    root = math.sqrt(max(q_v, 0.0))
    half = math.sqrt(max(zeta, 0.0) / n)
    return (max(root - half, 0.0), root + half)


def fold_weights(plan: FoldPlan) -> np.ndarray:
    """Per-row weights 1/(K * n_k(i)); uniform 1/n at equal fold sizes."""
    sizes = plan.fold_sizes()
    return 1.0 / (plan.K * sizes[plan.assignment])


def sigma_hat_sq(G: np.ndarray, plan: FoldPlan, clamp: bool = True) -> float:
    """Variance of the projection of the summands onto the estimator.

    Foldwise double-average structure: mean over o' of (mean over o of
    G(o, o'))^2 minus the squared double mean; nonnegative up to roundoff.
    """
    w = fold_weights(plan)
    row = w @ G  # weighted mean over o, for each o'
    total = float(row @ w)
    s = float(row * row @ w) - total * total
    if clamp:
        s = max(s, 0.0)
    return s


def delta_ci(q_u: float, sigma_sq: float, n: int, alpha: float) -> tuple[float, float]:
    """Delta-method interval for the squared norm, centered at the U-statistic."""
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be nonnegative")
    z = float(norm.ppf(1.0 - alpha / 2.0))
    half = 2.0 * z * math.sqrt(sigma_sq / n)
    return (q_u - half, q_u + half)


def union_ci(delta: tuple[float, float], triangle: tuple[float, float]):
    """Delta interval, augmented with {0} iff the triangle interval covers 0."""
    includes_zero = triangle[0] <= 0.0 <= triangle[1]
    return delta, includes_zero


def diagnostic_ratio(zeta: float, sigma_sq: float, n: int, beta: float) -> float:
    """Scale of the quadratic remainder relative to the delta-method linear
    term: n^{-1/2} zeta / (2 sigma z_{1-beta/2}). Small is good."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    sigma = math.sqrt(max(sigma_sq, 0.0))
    if sigma == 0.0:
        raise DiagnosticUndefined("sigma-hat is zero; treat the delta CI as untrustworthy")
    return float(zeta / (math.sqrt(n) * 2.0 * sigma * norm.ppf(1.0 - beta / 2.0)))


@dataclass(frozen=True)
class InferenceReport:
    """Full inference output for one dataset."""

    q_v: float
    q_u: float
    zeta: float
    sigma_sq: float
    triangle_lo: float
    triangle_hi: float
    delta_lo: float
    delta_hi: float
    union_includes_zero: bool
    diagnostic: float  # inf when undefined (sigma-hat = 0)
    reject_null: bool
    p_value_surrogate: float
    alpha: float
    beta: float
    B: int
    n: int
    K: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "InferenceReport":
        return cls(**d)


def infer_from_gram(
    G: np.ndarray,
    plan: FoldPlan,
    B: int = 1000,
    alpha: float = 0.05,
    beta: float | None = None,
    seed: int = 0,
    allow_small_B: bool = False,
) -> InferenceReport:
    """All inference quantities from the assembled Gram matrix."""
    from .estimator import u_statistic, v_statistic

    beta = alpha if beta is None else beta
    n = G.shape[0]
    q_v = v_statistic(G)
    q_u = u_statistic(G)
    zeta, boot = bootstrap_quantile(G, plan, B, alpha, seed, allow_small_B)
    sig = sigma_hat_sq(G, plan)
    tri = triangle_ci(q_v, zeta, n)
    dlt = delta_ci(q_u, sig, n, alpha)
    _, includes_zero = union_ci(dlt, tri)
    try:
        diag = diagnostic_ratio(zeta, sig, n, beta)
    except DiagnosticUndefined:
        diag = math.inf
    reject = n * q_v > zeta
    p_surrogate = float(np.mean(boot >= n * q_v))
    return InferenceReport(
        q_v=q_v,
        q_u=q_u,
        zeta=zeta,
        sigma_sq=sig,
        triangle_lo=tri[0],
        triangle_hi=tri[1],
        delta_lo=dlt[0],
        delta_hi=dlt[1],
        union_includes_zero=includes_zero,
        diagnostic=diag,
        reject_null=reject,
        p_value_surrogate=p_surrogate,
        alpha=float(alpha),
        beta=float(beta),
        B=int(B),
        n=int(n),
        K=int(plan.K),
        seed=int(seed),
    )


def run_inference(
    data: Dataset,
    K: int = 5,
    B: int = 1000,
    alpha: float = 0.05,
    beta: float | None = None,
    seed: int = 0,
    nuisance_cfg: NuisanceConfig | None = None,
    spec_k=None,
    allow_small_B: bool = False,
):
    """Full pipeline: folds -> nuisances -> Gram matrix -> inference.

    Returns (InferenceReport, GramStore).
    """
    from .estimator import build_gram_store

    plan = make_folds(data.n, K, seed)
    nuisance = fit_fold_nuisances(data, plan, nuisance_cfg)
    store = build_gram_store(data, nuisance, spec_k)
    report = infer_from_gram(store.G, plan, B, alpha, beta, seed, allow_small_B)
    return report, store
