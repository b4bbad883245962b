"""Synthetic experiment families and oracle ground-truth signal.

Three generators: a random-Fourier additive-noise model with tunable mean
smoothness and noise heterogeneity, a two-group covariate model with a
trigonometric mean, and a fixed nonlinear causal pair evaluated in both
orientations. Normalization constants are computed by dense-grid quadrature
over the covariate law rather than in closed form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .baselines import hsic_u_stat
from .crossfit import Dataset
from .kernels import KernelSpec, eval_gram, gaussian_spec, resolve_spec

N_FOURIER_TERMS = 20
_GRID_POINTS = 1_000_000
_GRID_CHUNK = 100_000


def _grid_moments(f, lo: float, hi: float) -> tuple[float, float]:
    """(mean, variance) of f over a dense uniform grid on [lo, hi]."""
    total = total_sq = 0.0
    for start in range(0, _GRID_POINTS, _GRID_CHUNK):
        x = lo + (hi - lo) * (np.arange(start, start + _GRID_CHUNK) + 0.5) / _GRID_POINTS
        vals = f(x)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
    mean = total / _GRID_POINTS
    return mean, total_sq / _GRID_POINTS - mean * mean


def _fourier_series(x: np.ndarray, coef: np.ndarray, decay: float, phases: np.ndarray) -> np.ndarray:
    k = np.arange(1, coef.size + 1)
    return np.sin(np.multiply.outer(x, k) + phases[None, :]) @ (coef * k ** (-decay))


@dataclass(frozen=True)
class FourierAnmConfig:
    """Additive-noise model with random-Fourier mean and log-Fourier noise scale."""

    s_m: float
    s_eps: float
    rho: float
    n: int
    seed: int
    sigma0: float = 0.35
    function_seed: int | None = None  # fix the random functions across datasets

    def __post_init__(self):
        if self.s_m <= 0 or self.s_eps <= 0:
            raise ValueError("decay exponents must be positive")
        if self.rho < 0:
            raise ValueError("heterogeneity strength must be nonnegative")
        if self.sigma0 <= 0:
            raise ValueError("baseline noise scale must be positive")


@dataclass(frozen=True)
class FourierAnmModel:
    """Realized random functions of one Fourier ANM draw."""

    cfg: FourierAnmConfig
    a: np.ndarray
    phi_m: np.ndarray
    b: np.ndarray
    phi_s: np.ndarray
    c_m: float
    c_eps: float

    def m(self, x: np.ndarray) -> np.ndarray:
        return self.c_m * _fourier_series(np.asarray(x, dtype=np.float64), self.a, self.cfg.s_m, self.phi_m)

    def g(self, x: np.ndarray) -> np.ndarray:
        return _fourier_series(np.asarray(x, dtype=np.float64), self.b, self.cfg.s_eps, self.phi_s)

    def sigma(self, x: np.ndarray) -> np.ndarray:
        return self.cfg.sigma0 * np.exp(self.cfg.rho * self.c_eps * self.g(x))

    def sample(self, n: int, seed: int, index: int = 0) -> tuple[Dataset, np.ndarray]:
        """Draw n observations; returns (dataset, oracle residuals sigma(X)*Z)."""
        X = rng.stream(seed, "anm-x", index).uniform(-3.0, 3.0, n)
        Z = rng.stream(seed, "anm-z", index).standard_normal(n)
        xi = self.sigma(X) * Z
        Y = self.m(X) + xi
        return Dataset(X=X, W=X, Y=Y), xi[:, None]


def make_fourier_model(cfg: FourierAnmConfig) -> FourierAnmModel:
    """Draw the Fourier coefficients and normalize so the mean function and
    the scaled log-noise series both have unit variance under Unif[-3, 3]."""
    fseed = cfg.seed if cfg.function_seed is None else cfg.function_seed
    g = rng.stream(fseed, "anm-fn")
    a = g.standard_normal(N_FOURIER_TERMS)
    phi_m = g.uniform(-math.pi, math.pi, N_FOURIER_TERMS)
    b = g.standard_normal(N_FOURIER_TERMS)
    phi_s = g.uniform(-math.pi, math.pi, N_FOURIER_TERMS)
    _, var_m = _grid_moments(lambda x: _fourier_series(x, a, cfg.s_m, phi_m), -3.0, 3.0)
    _, var_g = _grid_moments(lambda x: _fourier_series(x, b, cfg.s_eps, phi_s), -3.0, 3.0)
    if var_m <= 0 or var_g <= 0:
        raise ValueError("degenerate Fourier draw: zero-variance function")
    return FourierAnmModel(cfg, a, phi_m, b, phi_s, 1.0 / math.sqrt(var_m), 1.0 / math.sqrt(var_g))


def gen_fourier_anm(cfg: FourierAnmConfig) -> Dataset:
    data, _ = make_fourier_model(cfg).sample(cfg.n, cfg.seed)
    return data


@dataclass(frozen=True)
class CovariateGroupConfig:
    """Two-group model: binary group, circular covariate, trigonometric mean."""

    arm: str  # "null" or "alternative"
    seed: int
    n: int = 120

    def __post_init__(self):
        if self.arm not in ("null", "alternative"):
            raise ValueError("arm must be 'null' or 'alternative'")

    def sigmas(self) -> tuple[float, float]:
        """(sigma for group 0, sigma for group 1)."""
        return (0.45, 0.45) if self.arm == "null" else (0.35, 0.55)


def group_mean(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """m(x, t) = 1.5 {0.2 x + sum_{k=1}^5 [(.30/k) sin kt + (.25/k) cos kt
    + (.22/k) x sin kt + (.18/k) x cos kt]}."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    acc = 0.2 * x
    for k in range(1, 6):
        s, c = np.sin(k * t), np.cos(k * t)
        acc = acc + (0.30 * s + 0.25 * c + 0.22 * x * s + 0.18 * x * c) / k
    return 1.5 * acc


def gen_covariate_groups(cfg: CovariateGroupConfig) -> tuple[Dataset, np.ndarray]:
    """Returns (dataset with W = (group, circular covariate), oracle residuals)."""
    X = rng.stream(cfg.seed, "groups-x").integers(0, 2, cfg.n).astype(np.float64)
    T = rng.stream(cfg.seed, "groups-t").uniform(-math.pi, math.pi, cfg.n)
    eps = rng.stream(cfg.seed, "groups-z").standard_normal(cfg.n)
    s0, s1 = cfg.sigmas()
    xi = np.where(X == 0.0, s0, s1) * eps
    Y = group_mean(X, T) + xi
    return Dataset(X=X, W=np.column_stack([X, T]), Y=Y), xi[:, None]


@dataclass(frozen=True)
class CausalPairConfig:
    """Forward-structural nonlinear pair X -> Y with optional heteroscedasticity."""

    rho: float
    n: int
    seed: int

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("heterogeneity strength must be nonnegative")


def _pair_mean(x: np.ndarray) -> np.ndarray:
    return 0.55 * x + 0.95 * np.sin(1.65 * x) + 0.38 * np.sin(3.6 * x) + 0.1 * x ** 3


def _pair_h(x: np.ndarray) -> np.ndarray:
    return np.sin(1.6 * x) + 0.35 * np.cos(2.4 * x)


def gen_causal_pair(cfg: CausalPairConfig) -> tuple[Dataset, Dataset, np.ndarray]:
    """(forward dataset, reversed dataset, oracle forward residuals).

    X ~ Unif[-3, 3]; the log-noise modulation h is standardized by grid
    quadrature over the X law. The reversed dataset swaps the variable roles.
    """
    mean_h, var_h = _grid_moments(_pair_h, -3.0, 3.0)
    c = math.sqrt(1.0 / var_h)
    X = rng.stream(cfg.seed, "pair-x").uniform(-3.0, 3.0, cfg.n)
    Z = rng.stream(cfg.seed, "pair-z").standard_normal(cfg.n)
    sigma = 0.45 * np.exp(c * cfg.rho * (_pair_h(X) - mean_h))
    xi = sigma * Z
    Y = _pair_mean(X) + xi
    forward = Dataset(X=X, W=X, Y=Y)
    reverse = Dataset(X=Y, W=Y, Y=X)
    return forward, reverse, xi[:, None]


@dataclass(frozen=True)
class OracleSignal:
    """Monte-Carlo ground truth for the squared operator norm and its root."""

    hsic: float  # unbiased estimate of the squared norm
    se: float  # standard error of `hsic`
    norm: float  # sqrt(max(hsic, 0))
    N_large: int
    blocks: int


def oracle_signal(
    sampler,
    N_large: int = 200_000,
    seed: int = 0,
    spec_k: KernelSpec | None = None,
    spec_l: KernelSpec | None = None,
    block_size: int = 1000,
) -> OracleSignal:
    """Ground-truth signal from oracle residuals.

    ``sampler(n, seed)`` must return (Dataset, oracle residuals (n, d_y)).
    Draws one large sample, fixes median-heuristic bandwidths on a leading
    subsample, then averages the unbiased plug-in statistic over disjoint
    blocks; the block spread gives the standard error.
    """
    if N_large < 100_000:
        raise ValueError("need at least 1e5 oracle samples")
    data, xi = sampler(N_large, seed)
    bw_rows = min(N_large, 2000)
    spec_k_r = resolve_spec(spec_k if spec_k is not None else gaussian_spec(), data.X[:bw_rows])
    spec_l_r = resolve_spec(spec_l if spec_l is not None else gaussian_spec(), xi[:bw_rows])

    blocks = N_large // block_size
    vals = np.empty(blocks)
    for i in range(blocks):
        sl = slice(i * block_size, (i + 1) * block_size)
        K_gram = eval_gram(spec_k_r, data.X[sl], data.X[sl])
        L_gram = eval_gram(spec_l_r, xi[sl], xi[sl])
        vals[i] = hsic_u_stat(K_gram, L_gram)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(blocks))
    return OracleSignal(est, se, math.sqrt(max(est, 0.0)), int(N_large), blocks)


def write_dataset(path, data: Dataset) -> None:
    """Columnar text format: header row of x_*, w_*, y_* column names,
    comma-separated full-precision decimals, LF line endings."""
    header = (
        [f"x_{j + 1}" for j in range(data.X.shape[1])]
        + [f"w_{j + 1}" for j in range(data.W.shape[1])]
        + [f"y_{j + 1}" for j in range(data.Y.shape[1])]
    )
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in np.hstack([data.X, data.W, data.Y]):
            writer.writerow([repr(float(v)) for v in row])


def read_dataset(path) -> Dataset:
    """Inverse of :func:`write_dataset`; errors name any missing column group."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty dataset file") from None
        rows = list(reader)
    groups = {"x": [], "w": [], "y": []}
    for i, name in enumerate(header):
        prefix = name.split("_", 1)[0].strip().lower()
        if prefix not in groups:
            raise ValueError(f"{path}: unrecognized column '{name}' (expected x_*, w_*, y_*)")
        groups[prefix].append(i)
    for prefix, cols in groups.items():
        if not cols:
            raise ValueError(f"{path}: missing required column group '{prefix}_*'")
    try:
        table = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows (expected {len(header)} columns)")
    return Dataset(X=table[:, groups["x"]], W=table[:, groups["w"]], Y=table[:, groups["y"]])
