"""Synthetic generators, normalization, and the oracle signal."""

import math

import numpy as np
import pytest

from debiased_hsic.synthdata import (
    CausalPairConfig,
    CovariateGroupConfig,
    FourierAnmConfig,
    gen_causal_pair,
    gen_covariate_groups,
    gen_fourier_anm,
    group_mean,
    make_fourier_model,
    oracle_signal,
    read_dataset,
    write_dataset,
)


def _cfg(rho=0.0, n=200, seed=0, **kw):
    return FourierAnmConfig(s_m=1.0, s_eps=0.75, rho=rho, n=n, seed=seed, **kw)


def test_fourier_mean_normalized_to_unit_variance():
    model = make_fourier_model(_cfg(seed=1))
    grid = np.linspace(-3, 3, 1_000_000)
    var = float(np.var(model.m(grid)))
    assert 0.98 <= var <= 1.02


def test_fourier_noise_scale_normalized():
    model = make_fourier_model(_cfg(rho=0.4, seed=2))
    grid = np.linspace(-3, 3, 1_000_000)
    assert float(np.var(model.c_eps * model.g(grid))) == pytest.approx(1.0, abs=0.02)


def test_fourier_homogeneous_at_rho_zero():
    model = make_fourier_model(_cfg(rho=0.0, seed=3))
    x = np.linspace(-3, 3, 100)
    np.testing.assert_allclose(model.sigma(x), 0.35)


def test_fourier_sample_bounds_and_determinism():
    data = gen_fourier_anm(_cfg(n=500, seed=4))
    assert data.n == 500
    assert np.all(data.X >= -3) and np.all(data.X <= 3)
    np.testing.assert_array_equal(data.W, data.X)
    data2 = gen_fourier_anm(_cfg(n=500, seed=4))
    np.testing.assert_array_equal(data.Y, data2.Y)
    data3 = gen_fourier_anm(_cfg(n=500, seed=5))
    assert not np.array_equal(data.Y, data3.Y)


def test_fourier_function_seed_fixes_functions_only():
    a = make_fourier_model(_cfg(seed=1, function_seed=42))
    b = make_fourier_model(_cfg(seed=2, function_seed=42))
    np.testing.assert_array_equal(a.a, b.a)
    assert a.c_m == b.c_m
    da, _ = a.sample(100, seed=1)
    db, _ = b.sample(100, seed=2)
    assert not np.array_equal(da.X, db.X)  # samples still differ by seed


def test_fourier_config_validation():
    with pytest.raises(ValueError):
        FourierAnmConfig(s_m=0.0, s_eps=1.0, rho=0.0, n=10, seed=0)
    with pytest.raises(ValueError):
        FourierAnmConfig(s_m=1.0, s_eps=1.0, rho=-0.1, n=10, seed=0)


def test_group_mean_hand_value():
    # m(0, 0) = 1.5 * 0.25 * (1 + 1/2 + 1/3 + 1/4 + 1/5) = 0.85625
    assert group_mean(np.array([0.0]), np.array([0.0]))[0] == pytest.approx(0.85625, rel=1e-12)


def test_covariate_groups_arms_and_shapes():
    data, xi = gen_covariate_groups(CovariateGroupConfig("null", seed=0))
    assert data.n == 120 and data.W.shape == (120, 2)
    assert set(np.unique(data.X)) <= {0.0, 1.0}
    # Bernoulli(1/2) frequency within 4/sqrt(n) * (1/2)
    assert abs(data.X.mean() - 0.5) <= 2.0 / math.sqrt(120)
    assert np.all(np.abs(data.W[:, 1]) <= math.pi)
    cfg = CovariateGroupConfig("alternative", seed=0)
    assert cfg.sigmas() == (0.35, 0.55)
    assert CovariateGroupConfig("null", seed=0).sigmas() == (0.45, 0.45)
    with pytest.raises(ValueError):
        CovariateGroupConfig("other", seed=0)


def test_covariate_groups_residuals_consistent():
    data, xi = gen_covariate_groups(CovariateGroupConfig("alternative", seed=1))
    recomputed = data.Y[:, 0] - group_mean(data.W[:, 0], data.W[:, 1])
    np.testing.assert_allclose(xi[:, 0], recomputed, rtol=1e-10, atol=1e-12)


def test_causal_pair_structure():
    fwd, rev, xi = gen_causal_pair(CausalPairConfig(rho=0.0, n=300, seed=2))
    np.testing.assert_array_equal(rev.X, fwd.Y)
    np.testing.assert_array_equal(rev.Y, fwd.X)
    assert np.all(np.abs(fwd.X) <= 3.0)
    # m(0) = 0: all four structural terms vanish at zero
    from debiased_hsic.synthdata import _pair_mean

    assert _pair_mean(np.array([0.0]))[0] == 0.0
    # rho = 0: homogeneous noise 0.45 -> residual sd near 0.45
    assert np.std(xi) == pytest.approx(0.45, abs=0.06)


def test_causal_pair_heteroscedastic_when_rho_positive():
    fwd0, _, xi0 = gen_causal_pair(CausalPairConfig(rho=0.0, n=2000, seed=3))
    fwd1, _, xi1 = gen_causal_pair(CausalPairConfig(rho=1.0, n=2000, seed=3))
    # same X draw; conditional sd varies with x only when rho > 0
    np.testing.assert_array_equal(fwd0.X, fwd1.X)
    ratio = np.abs(xi1[:, 0]) / np.maximum(np.abs(xi0[:, 0]), 1e-12)
    assert np.std(np.log(ratio)) > 0.1


def test_oracle_signal_null_is_near_zero():
    model = make_fourier_model(_cfg(rho=0.0, seed=6))
    orc = oracle_signal(model.sample, N_large=100_000, seed=6)
    assert abs(orc.hsic) <= 3.0 * orc.se
    assert orc.norm >= 0.0


def test_oracle_signal_positive_under_alternative():
    model = make_fourier_model(_cfg(rho=0.5, seed=7))
    orc = oracle_signal(model.sample, N_large=100_000, seed=7)
    assert orc.hsic > 5.0 * orc.se


def test_oracle_signal_reproducible_and_se_shrinks():
    model = make_fourier_model(_cfg(rho=0.3, seed=8))
    a = oracle_signal(model.sample, N_large=100_000, seed=8)
    b = oracle_signal(model.sample, N_large=100_000, seed=8)
    assert a == b
    big = oracle_signal(model.sample, N_large=200_000, seed=8)
    assert big.se < a.se  # more blocks, smaller standard error
    with pytest.raises(ValueError):
        oracle_signal(model.sample, N_large=10_000, seed=8)


def test_dataset_round_trip(tmp_path):
    data = gen_fourier_anm(_cfg(n=50, seed=9))
    path = tmp_path / "ds.csv"
    write_dataset(path, data)
    back = read_dataset(path)
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.W, data.W)
    np.testing.assert_array_equal(back.Y, data.Y)
    first = path.read_text().splitlines()[0]
    assert first == "x_1,w_1,y_1"


def test_read_dataset_structured_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x_1,w_1\n1.0,2.0\n")
    with pytest.raises(ValueError, match="y_"):
        read_dataset(p)
    p.write_text("x_1,w_1,q_1\n1.0,2.0,3.0\n")
    with pytest.raises(ValueError, match="q_1"):
        read_dataset(p)
    p.write_text("x_1,w_1,y_1\n1.0,oops,3.0\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_dataset(p)
    p.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_dataset(p)
