"""Fold-pair Gram entries of the cross-fitted one-step estimator.

For validation rows o1 in fold k1 and o2 in fold k2 the Gram entry factorizes
as

    G(o1, o2) = r_X(x1, x2) * { r_xi - r_xi_v(z1, z2) - r_xi_v(z2, z1) + r_v },

where r_X and r_xi are the centered covariate and residual kernel terms,
r_xi_v is the residual/derivative-nuisance cross term, and r_v the nuisance
diagonal term. All four reduce to contractions of stored Gram matrices, the
first-derivative tensor of the residual kernel, its mixed second-derivative
tensor, and the target-free vvKRR weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossfit import Dataset, FoldNuisance, FoldPlan
from .kernels import KernelSpec, eval_gram, eval_grad_gram, eval_mixed_gram, gaussian_spec, resolve_spec


def _centered_block(M: np.ndarray, rows1, rows2, comp1, comp2) -> np.ndarray:
    """Four-term centering of M over complement row/column sets."""
    block = M[np.ix_(rows1, rows2)]
    col_mean = M[np.ix_(comp1, rows2)].mean(axis=0)  # (len rows2,)
    row_mean = M[np.ix_(rows1, comp2)].mean(axis=1)  # (len rows1,)
    grand = M[np.ix_(comp1, comp2)].mean()
    return block - col_mean[None, :] - row_mean[:, None] + grand


class PairComputer:
    """Computes the r-terms of one ordered fold pair (k1, k2)."""

    def __init__(self, data: Dataset, nuisance: FoldNuisance, K_full: np.ndarray):
        self.data = data
        self.nu = nuisance
        self.plan = nuisance.plan
        self.K_full = K_full
        self._L_cache: dict[tuple[int, int], np.ndarray] = {}

    def _rows(self, k, rows):
        return self.plan.fold_rows(k) if rows is None else np.asarray(rows)

    def L(self, k1: int, k2: int) -> np.ndarray:
        """Full n x n residual Gram l(xi^{-k1}(z_i), xi^{-k2}(z_j))."""
        key = (k1, k2)
        if key not in self._L_cache:
            if (k2, k1) in self._L_cache:
                self._L_cache[key] = self._L_cache[(k2, k1)].T
            else:
                R1 = self.nu.residuals[k1].T
                R2 = self.nu.residuals[k2].T
                self._L_cache[key] = eval_gram(self.nu.spec_l, R1, R2)
        return self._L_cache[key]

    def r_x(self, k1, k2, rows1=None, rows2=None) -> np.ndarray:
        rows1, rows2 = self._rows(k1, rows1), self._rows(k2, rows2)
        return _centered_block(
            self.K_full, rows1, rows2,
            self.plan.complement_rows(k1), self.plan.complement_rows(k2),
        )

    def r_xi(self, k1, k2, rows1=None, rows2=None) -> np.ndarray:
        rows1, rows2 = self._rows(k1, rows1), self._rows(k2, rows2)
        return _centered_block(
            self.L(k1, k2), rows1, rows2,
            self.plan.complement_rows(k1), self.plan.complement_rows(k2),
        )

    def r_xi_v(self, k1, k2, rows1=None, rows2=None) -> np.ndarray:
        """Cross term: inner product of the centered residual feature at z1
        (fold-k1 nuisances) with the nuisance correction at z2 (fold-k2)."""
        rows1, rows2 = self._rows(k1, rows1), self._rows(k2, rows2)
        C1 = self.plan.complement_rows(k1)
        C2 = self.plan.complement_rows(k2)
        # dL[j, a, b] = d/du_j l(u, v) at u = xi^{-k2}(z_{C2[a]}), v = xi^{-k1}(z_b)
        R2C = self.nu.residuals[k2][:, C2].T
        R1 = self.nu.residuals[k1].T
        dL = eval_grad_gram(self.nu.spec_l, R2C, R1)  # (d_y, |C2|, n)
        centered = dL[:, :, rows1] - dL[:, :, C1].mean(axis=2, keepdims=True)
        W2 = self.nu.weights[k2].weights[:, :, rows2]  # (d_y, |C2|, |rows2|)
        Xi2 = self.nu.residuals[k2][:, rows2]  # (d_y, |rows2|)
        return np.einsum("jaq,jq,jap->pq", W2, Xi2, centered, optimize=True)

    def r_v(self, k1, k2, rows1=None, rows2=None) -> np.ndarray:
        rows1, rows2 = self._rows(k1, rows1), self._rows(k2, rows2)
        C1 = self.plan.complement_rows(k1)
        C2 = self.plan.complement_rows(k2)
        R1C = self.nu.residuals[k1][:, C1].T
        R2C = self.nu.residuals[k2][:, C2].T
        dd = eval_mixed_gram(self.nu.spec_l, R1C, R2C)  # (d_y, d_y, |C1|, |C2|)
        W1 = self.nu.weights[k1].weights[:, :, rows1]  # (d_y, |C1|, |rows1|)
        W2 = self.nu.weights[k2].weights[:, :, rows2]
        Xi1 = self.nu.residuals[k1][:, rows1]
        Xi2 = self.nu.residuals[k2][:, rows2]
        half = np.einsum("jkab,kbq,kq->jaq", dd, W2, Xi2, optimize=True)
        return np.einsum("jap,jp,jaq->pq", W1, Xi1, half, optimize=True)

    def gram_block(self, k1, k2) -> np.ndarray:
        """Gram entries over validation rows of folds k1 and k2."""
        cross12 = self.r_xi_v(k1, k2)
        cross21 = self.r_xi_v(k2, k1).T
        return self.r_x(k1, k2) * (self.r_xi(k1, k2) - cross12 - cross21 + self.r_v(k1, k2))


@dataclass(frozen=True)
class GramStore:
    """Assembled n x n Gram matrix G of one-step summand inner products."""

    G: np.ndarray
    K_full: np.ndarray
    plan: FoldPlan
    spec_k: KernelSpec
    spec_l: KernelSpec

    @property
    def n(self) -> int:
        return self.G.shape[0]


def build_gram_store(
    data: Dataset,
    nuisance: FoldNuisance,
    spec_k: KernelSpec | None = None,
) -> GramStore:
    """Assemble the full Gram matrix from per-fold-pair blocks.

    The covariate-kernel bandwidth rule is resolved on the full X sample.
    """
    spec_k = resolve_spec(spec_k if spec_k is not None else gaussian_spec(), data.X)
    plan = nuisance.plan
    K_full = eval_gram(spec_k, data.X, data.X)
    pc = PairComputer(data, nuisance, K_full)
    n = data.n
    G = np.empty((n, n))
    for k1 in range(plan.K):
        rows1 = plan.fold_rows(k1)
        for k2 in range(k1, plan.K):
            rows2 = plan.fold_rows(k2)
            block = pc.gram_block(k1, k2)
            G[np.ix_(rows1, rows2)] = block
            if k2 > k1:
                G[np.ix_(rows2, rows1)] = block.T
    return GramStore(G, K_full, plan, spec_k, nuisance.spec_l)


def _total(G: np.ndarray) -> float:
    # compensated accumulation: entries are small differences of O(1) terms
    if G.shape[0] >= 1000:
        return float(np.sum(G, dtype=np.longdouble))
    return float(G.sum())


def v_statistic(G: np.ndarray) -> float:
    """Squared norm of the cross-fitted one-step estimator: n^-2 sum of G."""
    n = G.shape[0]
    return _total(G) / (n * n)


def u_statistic(G: np.ndarray) -> float:
    """Diagonal-free analogue: (n(n-1))^-1 sum over i != j."""
    n = G.shape[0]
    if n < 2:
        raise ValueError("u-statistic needs n >= 2")
    return (_total(G) - float(np.trace(G))) / (n * (n - 1))


def fold_pair_inner(
    G: np.ndarray,
    plan: FoldPlan,
    k1: int,
    k2: int,
    mult1: np.ndarray | None = None,
    mult2: np.ndarray | None = None,
) -> float:
    """Inner product of (possibly bootstrapped) fold averages of the summands.

    ``mult1``/``mult2`` are bootstrap multiplicity vectors over the validation
    rows of each fold; None means the original sample (all ones).
    """
    rows1, rows2 = plan.fold_rows(k1), plan.fold_rows(k2)
    block = G[np.ix_(rows1, rows2)]
    m1 = np.ones(rows1.size) if mult1 is None else np.asarray(mult1, dtype=np.float64)
    m2 = np.ones(rows2.size) if mult2 is None else np.asarray(mult2, dtype=np.float64)
    if m1.size != rows1.size or m2.size != rows2.size:
        raise ValueError("multiplicity vector length does not match fold size")
    return float(m1 @ block @ m2) / (rows1.size * rows2.size)
