"""Plug-in permutation baselines."""

import numpy as np
import pytest

from debiased_hsic.baselines import (
    PermutationResult,
    crossfit_permutation_test,
    hsic_u_stat,
    mmd2_u_stat,
    plugin_hsic_stat,
    split_fit_test,
)
from debiased_hsic.crossfit import Dataset, NuisanceConfig, fit_fold_regressions, make_folds
from debiased_hsic.kernels import eval_gram, gaussian_spec

from oracles import plugin_hsic


def _grams(n=15, seed=0):
    g = np.random.default_rng(seed)
    X = g.normal(size=(n, 1))
    R = g.normal(size=(n, 1))
    spec = gaussian_spec(bandwidth=1.0)
    return eval_gram(spec, X, X), eval_gram(spec, R, R)


def test_plugin_hsic_matches_projector_formula():
    K, L = _grams(n=12, seed=1)
    assert plugin_hsic_stat(K, L) == pytest.approx(plugin_hsic(K, L), rel=1e-12)


def test_plugin_hsic_three_by_three_hand_value():
    # K and L chosen so the doubly centered product is easy to verify by hand
    K = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.5], [0.2, 0.5, 1.0]])
    L = np.array([[1.0, 0.1, 0.4], [0.1, 1.0, 0.1], [0.4, 0.1, 1.0]])
    H = np.eye(3) - np.ones((3, 3)) / 3
    expected = float(np.trace(H @ K @ H @ H @ L @ H)) / 9
    assert plugin_hsic_stat(K, L) == pytest.approx(expected, rel=1e-12)


def test_plugin_hsic_annihilates_constants():
    K, _ = _grams(n=10, seed=2)
    L = np.full((10, 10), 0.7)
    assert plugin_hsic_stat(K, L) == pytest.approx(0.0, abs=1e-15)
    # invariance under adding a constant to every entry
    _, L2 = _grams(n=10, seed=3)
    assert plugin_hsic_stat(K, L2 + 5.0) == pytest.approx(plugin_hsic_stat(K, L2), rel=1e-9, abs=1e-15)


def test_plugin_hsic_nonnegative_for_psd_grams():
    for seed in range(5):
        K, L = _grams(n=20, seed=seed)
        assert plugin_hsic_stat(K, L) >= -1e-12


def test_plugin_hsic_validates_shape():
    with pytest.raises(ValueError):
        plugin_hsic_stat(np.eye(3), np.eye(4))


def test_hsic_u_stat_agrees_with_v_stat_at_large_n():
    g = np.random.default_rng(4)
    X = g.normal(size=(400, 1))
    R = g.normal(size=(400, 1))
    spec = gaussian_spec(bandwidth=1.0)
    K, L = eval_gram(spec, X, X), eval_gram(spec, R, R)
    u = hsic_u_stat(K, L)
    v = plugin_hsic_stat(K, L)
    assert abs(u - v) < 0.05 * max(abs(v), 1e-3) + 5e-3


def test_hsic_u_stat_unbiased_under_independence():
    # average over seeds is centered near zero, unlike the V-statistic
    spec = gaussian_spec(bandwidth=1.0)
    vals = []
    for seed in range(40):
        g = np.random.default_rng(seed)
        X = g.normal(size=(30, 1))
        R = g.normal(size=(30, 1))
        vals.append(hsic_u_stat(eval_gram(spec, X, X), eval_gram(spec, R, R)))
    assert abs(np.mean(vals)) < 3 * np.std(vals) / np.sqrt(len(vals)) + 1e-4


def test_mmd2_u_stat_zero_for_identical_samples():
    g = np.random.default_rng(5)
    A = g.normal(size=(50, 1))
    B = g.normal(size=(50, 1))
    spec = gaussian_spec(bandwidth=1.0)

    def mmd(A, B):
        return mmd2_u_stat(eval_gram(spec, A, A), eval_gram(spec, B, B), eval_gram(spec, A, B))

    assert abs(mmd(A, B[:50])) < 0.1  # same law: near zero
    shifted = B + 3.0
    assert mmd(A, shifted) > 0.5  # separated laws: strongly positive


def _dependent_data(n=80, seed=0, rho=1.0):
    g = np.random.default_rng(seed)
    X = g.uniform(-2, 2, n)
    noise = (0.2 + rho * 0.4 * (X > 0)) * g.standard_normal(n)
    Y = np.sin(X) + noise
    return Dataset(X=X, W=X, Y=Y)


def test_permutation_p_value_conventions():
    data = _dependent_data(n=60, seed=6, rho=0.0)
    res = split_fit_test(data, train_fraction=0.5, B_perm=99, alpha=0.05, seed=6)
    assert isinstance(res, PermutationResult)
    assert res.permuted.size == 99
    assert 1.0 / 100 <= res.p_value <= 1.0
    # add-one convention: p-value is a multiple of 1/(B+1)
    assert (res.p_value * 100) == pytest.approx(round(res.p_value * 100), abs=1e-9)


def test_split_test_rejects_strong_dependence():
    data = _dependent_data(n=200, seed=7, rho=4.0)
    res = split_fit_test(data, train_fraction=0.5, B_perm=199, alpha=0.05, seed=7)
    assert res.reject and res.p_value <= 0.05


def test_split_test_supports_common_fractions():
    data = _dependent_data(n=100, seed=8)
    for frac in (0.2, 0.4, 0.6, 0.8):
        res = split_fit_test(data, train_fraction=frac, B_perm=49, alpha=0.05, seed=8)
        assert 0.02 <= res.p_value <= 1.0


def test_split_test_rejects_tiny_splits():
    data = _dependent_data(n=30, seed=9)
    with pytest.raises(ValueError):
        split_fit_test(data, train_fraction=0.9, B_perm=49, seed=9)


def test_crossfit_test_uses_out_of_fold_residuals():
    # the observed statistic must be reproducible from fit_fold_regressions
    data = _dependent_data(n=60, seed=10)
    res = crossfit_permutation_test(data, K=3, B_perm=49, alpha=0.05, seed=10)

    plan = make_folds(data.n, 3, seed=10)
    _, residuals, _, _ = fit_fold_regressions(data, plan, NuisanceConfig())
    oof = np.empty((data.n, 1))
    for k in range(3):
        rows = plan.fold_rows(k)
        oof[rows] = residuals[k][:, rows].T
    from debiased_hsic.kernels import resolve_spec

    spec_k = resolve_spec(gaussian_spec(), data.X)
    spec_l = resolve_spec(gaussian_spec(), oof)
    expected = plugin_hsic_stat(eval_gram(spec_k, data.X, data.X), eval_gram(spec_l, oof, oof))
    assert res.observed == pytest.approx(expected, rel=1e-12)


def test_permutation_determinism():
    data = _dependent_data(n=60, seed=11)
    a = crossfit_permutation_test(data, K=2, B_perm=29, seed=5)
    b = crossfit_permutation_test(data, K=2, B_perm=29, seed=5)
    assert a.observed == b.observed and a.p_value == b.p_value
    np.testing.assert_array_equal(a.permuted, b.permuted)


def test_identity_permutation_reproduces_observed():
    # permuting rows/cols jointly by the identity leaves the statistic fixed
    K, L = _grams(n=12, seed=12)
    idx = np.arange(12)
    assert plugin_hsic_stat(K, L[np.ix_(idx, idx)]) == plugin_hsic_stat(K, L)


def test_permutation_p_values_uniform_under_oracle_null():
    # with oracle residuals the pairs are exchangeable under the null, so the
    # permutation p-values are uniform up to discreteness (Kolmogorov-Smirnov
    # check at level 0.01 over 200 seeds)
    from scipy.stats import kstest

    from debiased_hsic.baselines import _permutation_test

    spec = gaussian_spec(bandwidth=1.0)
    pvals = []
    for seed in range(200):
        g = np.random.default_rng(1000 + seed)
        X = g.uniform(-2, 2, 60)[:, None]
        xi = 0.5 * g.standard_normal(60)[:, None]  # true residuals, independent of X
        res = _permutation_test(eval_gram(spec, X, X), eval_gram(spec, xi, xi),
                                B_perm=99, alpha=0.05, seed=1000 + seed)
        pvals.append(res.p_value)
    assert kstest(pvals, "uniform").pvalue > 0.01
