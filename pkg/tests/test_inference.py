"""Bootstrap calibration, intervals, and the test decision."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from debiased_hsic import rng
from debiased_hsic.crossfit import Dataset, make_folds
from debiased_hsic.estimator import v_statistic
from debiased_hsic.inference import (
    DiagnosticUndefined,
    InferenceReport,
    bootstrap_multiplicities,
    bootstrap_norms,
    bootstrap_quantile,
    delta_ci,
    diagnostic_ratio,
    fold_weights,
    infer_from_gram,
    run_inference,
    sigma_hat_sq,
    triangle_ci,
    union_ci,
)

from oracles import bootstrap_norm as oracle_boot_norm, sigma_sq as oracle_sigma_sq


def _gram(n=24, seed=0, K=2):
    g = np.random.default_rng(seed)
    A = g.normal(size=(n, n))
    G = (A + A.T) / 2
    plan = make_folds(n, K, seed)
    return G, plan


def test_multiplicities_sum_to_fold_sizes():
    _, plan = _gram(n=25, K=3)
    counts = bootstrap_multiplicities(plan, B=50, seed=4)
    assert counts.shape == (50, 25)
    for k in range(3):
        rows = plan.fold_rows(k)
        np.testing.assert_array_equal(counts[:, rows].sum(axis=1), rows.size)
    assert np.all(counts >= 0)


def test_multiplicities_per_draw_streams_are_order_independent():
    _, plan = _gram(n=20, K=2)
    full = bootstrap_multiplicities(plan, B=10, seed=9)
    # recomputing a single draw in isolation reproduces the same counts
    g = rng.stream(9, "bootstrap", 7)
    single = np.empty(20, dtype=np.int64)
    for k in range(2):
        rows = plan.fold_rows(k)
        single[rows] = g.multinomial(rows.size, np.full(rows.size, 1.0 / rows.size))
    np.testing.assert_array_equal(full[7], single)


def test_bootstrap_norms_match_loop_oracle():
    G, plan = _gram(n=18, seed=1)
    counts = bootstrap_multiplicities(plan, B=5, seed=2)
    vals = bootstrap_norms(G, counts)
    for b in range(5):
        assert vals[b] == pytest.approx(oracle_boot_norm(G, counts[b]), rel=1e-12)


def test_bootstrap_norm_equals_resample_materialization():
    # materializing the resampled V-statistic must agree with the
    # multiplicity formula: ||H||^2 = n * (Q_V(resample) - 2*cross + Q_V)
    # is cumbersome; instead verify directly on the fold-average form
    G, plan = _gram(n=16, seed=3)
    counts = bootstrap_multiplicities(plan, B=3, seed=5)
    n = G.shape[0]
    for b in range(3):
        # build the resampled index list per fold and compute
        # sqrt(n)/K * sum_k (mean over resample - mean over fold) explicitly
        M = counts[b].astype(float) - 1.0
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += M[i] * M[j] * G[i, j]
        assert bootstrap_norms(G, counts[b : b + 1])[0] == pytest.approx(total / n, rel=1e-12)


def test_quantile_order_statistic_convention():
    G, plan = _gram(n=20, seed=6)
    zeta, vals = bootstrap_quantile(G, plan, B=200, alpha=0.05, seed=7)
    assert zeta == float(np.sort(vals)[math.ceil(0.95 * 200) - 1])
    # monotone in alpha: smaller alpha gives a larger quantile
    zeta_low, _ = bootstrap_quantile(G, plan, B=200, alpha=0.01, seed=7)
    assert zeta_low >= zeta


def test_quantile_rejects_tiny_B():
    G, plan = _gram()
    with pytest.raises(ValueError):
        bootstrap_quantile(G, plan, B=50, alpha=0.05, seed=0)
    zeta, vals = bootstrap_quantile(G, plan, B=50, alpha=0.05, seed=0, allow_small_B=True)
    assert vals.size == 50
    with pytest.raises(ValueError):
        bootstrap_quantile(G, plan, B=200, alpha=1.5, seed=0)


def test_triangle_ci_forms():
    lo, hi = triangle_ci(q_v=0.09, zeta=4.0, n=100)
    assert lo == pytest.approx(0.3 - 0.2)
    assert hi == pytest.approx(0.3 + 0.2)
    lo, hi = triangle_ci(q_v=0.01, zeta=4.0, n=100)
    assert lo == 0.0  # clipped at zero
    assert hi == pytest.approx(0.1 + 0.2)


def test_sigma_hat_matches_loop_oracle():
    G, plan = _gram(n=21, seed=8, K=3)
    ref = oracle_sigma_sq(G, plan)
    got = sigma_hat_sq(G, plan, clamp=False)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-15)


def test_sigma_hat_nonnegative_for_psd_gram():
    # for PSD G the projection variance is a true variance
    g = np.random.default_rng(10)
    A = g.normal(size=(20, 6))
    G = A @ A.T
    plan = make_folds(20, 2, seed=10)
    assert sigma_hat_sq(G, plan, clamp=False) >= -1e-12
    assert sigma_hat_sq(G, plan) >= 0.0


def test_fold_weights_uniform_at_equal_sizes():
    _, plan = _gram(n=20, K=2)
    np.testing.assert_allclose(fold_weights(plan), 1.0 / 20)


def test_delta_ci_hand_value():
    lo, hi = delta_ci(q_u=0.5, sigma_sq=0.04, n=100, alpha=0.05)
    half = 2 * norm.ppf(0.975) * 0.2 / 10
    assert lo == pytest.approx(0.5 - half)
    assert hi == pytest.approx(0.5 + half)
    with pytest.raises(ValueError):
        delta_ci(0.5, -1.0, 100, 0.05)


def test_union_ci_zero_augmentation():
    delta = (0.1, 0.2)
    got, includes_zero = union_ci(delta, (0.0, 0.3))
    assert got == delta and includes_zero
    _, includes_zero = union_ci(delta, (0.05, 0.3))
    assert not includes_zero


def test_diagnostic_ratio_and_undefined_case():
    val = diagnostic_ratio(zeta=2.0, sigma_sq=0.25, n=100, beta=0.05)
    assert val == pytest.approx(2.0 / (10 * 2 * 0.5 * norm.ppf(0.975)))
    with pytest.raises(DiagnosticUndefined):
        diagnostic_ratio(zeta=2.0, sigma_sq=0.0, n=100, beta=0.05)
    with pytest.raises(ValueError):
        diagnostic_ratio(zeta=2.0, sigma_sq=0.25, n=100, beta=1.5)


def test_reject_iff_statistic_exceeds_quantile_iff_zero_outside_triangle():
    for seed in range(6):
        G, plan = _gram(n=20, seed=seed)
        report = infer_from_gram(G, plan, B=150, alpha=0.05, seed=seed)
        n = G.shape[0]
        exceeds = n * v_statistic(G) > report.zeta
        zero_outside = not (report.triangle_lo <= 0.0 <= report.triangle_hi)
        assert report.reject_null == exceeds == zero_outside


def test_report_round_trip():
    G, plan = _gram(n=20, seed=11)
    report = infer_from_gram(G, plan, B=120, alpha=0.05, seed=11)
    clone = InferenceReport.from_dict(report.to_dict())
    assert clone == report


def test_run_inference_deterministic():
    g = np.random.default_rng(12)
    X = g.uniform(-2, 2, 40)
    Y = np.sin(X) + 0.3 * g.standard_normal(40)
    data = Dataset(X=X, W=X, Y=Y)
    r1, _ = run_inference(data, K=2, B=150, seed=3)
    r2, _ = run_inference(data, K=2, B=150, seed=3)
    assert r1 == r2
