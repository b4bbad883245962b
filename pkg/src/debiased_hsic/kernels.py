"""Scalar kernels, their derivative Gram tensors, and bandwidth selection.

Supported families:

* ``gaussian``: exp(-||u - v||^2 / (2 sigma^2))
* ``matern``: half-integer smoothness nu in {5/2, 7/2}; nu must exceed 2 so
  that mixed second derivatives of the kernel are bounded
* ``discrete``: indicator 1{u == v} for integer-coded group labels

Derivatives are always taken with respect to coordinates of the *first*
argument (and, for mixed derivatives, additionally the second argument).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist

GAUSSIAN = "gaussian"
MATERN = "matern"
DISCRETE = "discrete"

MEDIAN_HEURISTIC = "median-heuristic"

_MATERN_ORDERS = (2.5, 3.5)


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth (value or selection rule).

    ``bandwidth`` is either a positive float or the rule tag
    ``"median-heuristic"``; call :func:`resolve_bandwidth` to turn a rule
    into a value. The discrete indicator kernel carries no bandwidth.
    """

    family: str
    bandwidth: float | str | None = MEDIAN_HEURISTIC
    dimension: int = 1
    smoothness: float | None = field(default=None)

    def __post_init__(self):
        if self.family not in (GAUSSIAN, MATERN, DISCRETE):
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.dimension < 1:
            raise KernelError("dimension must be a positive integer")
        if self.family == DISCRETE:
            object.__setattr__(self, "bandwidth", None)
        else:
            if isinstance(self.bandwidth, (int, float)) and self.bandwidth <= 0:
                raise KernelError("bandwidth must be positive")
        if self.family == MATERN:
            if self.smoothness is None:
                object.__setattr__(self, "smoothness", 2.5)
            if self.smoothness not in _MATERN_ORDERS:
                raise KernelError(
                    "matern smoothness must be 5/2 or 7/2 (need nu > 2 and a "
                    "closed-form half-integer kernel)"
                )

    @property
    def resolved(self) -> bool:
        return self.family == DISCRETE or isinstance(self.bandwidth, (int, float))

    def with_bandwidth(self, sigma: float) -> "KernelSpec":
        return replace(self, bandwidth=float(sigma))


def gaussian_spec(bandwidth=MEDIAN_HEURISTIC, dimension=1) -> KernelSpec:
    return KernelSpec(GAUSSIAN, bandwidth, dimension)


def matern_spec(bandwidth=MEDIAN_HEURISTIC, dimension=1, smoothness=2.5) -> KernelSpec:
    return KernelSpec(MATERN, bandwidth, dimension, smoothness)


def discrete_spec(dimension=1) -> KernelSpec:
    return KernelSpec(DISCRETE, None, dimension)


def median_pairwise_distance(points: np.ndarray) -> float:
    """Median of the n(n-1)/2 distinct pairwise Euclidean distances."""
    points = _as_matrix(points)
    if points.shape[0] < 2:
        raise KernelError("median heuristic needs at least two points")
    med = float(np.median(pdist(points)))
    if med <= 0.0:
        raise KernelError("degenerate bandwidth: median pairwise distance is zero")
    return med


def resolve_bandwidth(spec: KernelSpec, points: np.ndarray) -> float:
    """Bandwidth value for ``spec`` on ``points``; fixed rules pass through."""
    if spec.family == DISCRETE:
        raise KernelError("discrete indicator kernel carries no bandwidth")
    if isinstance(spec.bandwidth, (int, float)):
        return float(spec.bandwidth)
    if spec.bandwidth == MEDIAN_HEURISTIC:
        return median_pairwise_distance(points)
    raise KernelError(f"unknown bandwidth rule {spec.bandwidth!r}")


def resolve_spec(spec: KernelSpec, points: np.ndarray) -> KernelSpec:
    """Copy of ``spec`` with any bandwidth rule replaced by its value and the
    dimension taken from ``points``."""
    d = _as_matrix(points).shape[1]
    if spec.family == DISCRETE:
        return replace(spec, dimension=d)
    return replace(spec, bandwidth=resolve_bandwidth(spec, points), dimension=d)


def resolve_spec_or_default(spec: KernelSpec, points: np.ndarray, fallback: float = 1.0) -> KernelSpec:
    """Like :func:`resolve_spec`, but degenerate point sets (zero median
    distance) fall back to a fixed bandwidth instead of raising.

    Intended for residual kernels: constant residuals then give a constant
    Gram, which downstream centering annihilates, so the fallback value is
    immaterial.
    """
    d = _as_matrix(points).shape[1]
    if spec.family == DISCRETE:
        return replace(spec, dimension=d)
    try:
        return resolve_spec(spec, points)
    except KernelError:
        return replace(spec, bandwidth=fallback, dimension=d)


def _as_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _check_inputs(spec: KernelSpec, A: np.ndarray, B: np.ndarray):
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape[1] != spec.dimension or B.shape[1] != spec.dimension:
        raise KernelError(
            f"dimension mismatch: spec has d={spec.dimension}, "
            f"inputs have {A.shape[1]} and {B.shape[1]}"
        )
    if not spec.resolved:
        raise KernelError("bandwidth not resolved; call resolve_bandwidth first")
    return A, B


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = np.sum(A * A, axis=1)[:, None]
    bb = np.sum(B * B, axis=1)[None, :]
    d2 = aa + bb - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def _matern_core(spec, A, B):
    """Return (gram, t, scale) with t = sqrt(2 nu) * r / sigma."""
    sigma = float(spec.bandwidth)
    r = np.sqrt(_sq_dists(A, B))
    if spec.smoothness == 2.5:
        t = np.sqrt(5.0) * r / sigma
        gram = (1.0 + t + t * t / 3.0) * np.exp(-t)
    else:  # nu = 7/2
        t = np.sqrt(7.0) * r / sigma
        gram = (1.0 + t + 0.4 * t * t + t**3 / 15.0) * np.exp(-t)
    return gram, t, sigma


def eval_gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix with entries kernel(A_i, B_j), shape (m, n)."""
    A, B = _check_inputs(spec, A, B)
    if spec.family == GAUSSIAN:
        sigma = float(spec.bandwidth)
        return np.exp(-_sq_dists(A, B) / (2.0 * sigma * sigma))
    if spec.family == MATERN:
        gram, _, _ = _matern_core(spec, A, B)
        return gram
    # discrete indicator: exact comparison after rounding to 12 significant digits
    Ar = _round_sig(A)
    Br = _round_sig(B)
    return np.all(Ar[:, None, :] == Br[None, :, :], axis=2).astype(np.float64)


def _round_sig(a: np.ndarray, digits: int = 12) -> np.ndarray:
    out = np.zeros_like(a)
    nz = a != 0
    mag = np.floor(np.log10(np.abs(a[nz])))
    out[nz] = np.round(a[nz] / 10.0**mag, digits - 1) * 10.0**mag
    return out


def eval_grad_gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """First-derivative tensor, shape (d, m, n).

    Entry (j, i, i') is the derivative of kernel(u, v) with respect to the
    j-th coordinate of the first argument, at u = A_i, v = B_i'.
    """
    A, B = _check_inputs(spec, A, B)
    if spec.family == DISCRETE:
        raise KernelError("discrete indicator kernel has no derivative")
    diff = A[:, None, :] - B[None, :, :]  # (m, n, d)
    if spec.family == GAUSSIAN:
        sigma = float(spec.bandwidth)
        gram = np.exp(-_sq_dists(A, B) / (2.0 * sigma * sigma))
        grad = -(diff / (sigma * sigma)) * gram[:, :, None]
    else:
        gram, t, sigma = _matern_core(spec, A, B)
        # radial form: grad_j = g(r) * (u_j - v_j), g = (1/r) dk/dr
        if spec.smoothness == 2.5:
            g = -(5.0 / (3.0 * sigma * sigma)) * (1.0 + t) * np.exp(-t)
        else:
            g = -(7.0 / (15.0 * sigma * sigma)) * (3.0 + 3.0 * t + t * t) * np.exp(-t)
        grad = diff * g[:, :, None]
    return np.moveaxis(grad, 2, 0)


def eval_mixed_gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Mixed second-derivative tensor, shape (d, d, m, n).

    Entry (j, r, i, i') is d^2 kernel / (d first-arg coord j)(d second-arg
    coord r), at (A_i, B_i').
    """
    A, B = _check_inputs(spec, A, B)
    if spec.family == DISCRETE:
        raise KernelError("discrete indicator kernel has no derivative")
    diff = A[:, None, :] - B[None, :, :]  # (m, n, d)
    d = spec.dimension
    eye = np.eye(d)
    if spec.family == GAUSSIAN:
        sigma = float(spec.bandwidth)
        s2 = sigma * sigma
        gram = np.exp(-_sq_dists(A, B) / (2.0 * s2))
        outer = np.einsum("mnj,mnr->jrmn", diff, diff)
        mixed = gram[None, None, :, :] * (eye[:, :, None, None] / s2 - outer / (s2 * s2))
    else:
        gram, t, sigma = _matern_core(spec, A, B)
        s2 = sigma * sigma
        et = np.exp(-t)
        outer = np.einsum("mnj,mnr->jrmn", diff, diff)
        if spec.smoothness == 2.5:
            diag = (5.0 / (3.0 * s2)) * (1.0 + t) * et
            cross = (25.0 / (3.0 * s2 * s2)) * et
        else:
            diag = (7.0 / (15.0 * s2)) * (3.0 + 3.0 * t + t * t) * et
            cross = (49.0 / (15.0 * s2 * s2)) * (1.0 + t) * et
        mixed = eye[:, :, None, None] * diag[None, None, :, :] - outer * cross[None, None, :, :]
    return mixed
