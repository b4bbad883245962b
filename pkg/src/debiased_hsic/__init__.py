"""Debiased cross-fitted kernel independence testing.

A one-step, K-fold cross-fitted estimator of the covariate-residual kernel
cross-covariance operator, with a bootstrap-calibrated independence test,
reverse-triangle and delta-method confidence intervals, plug-in permutation
baselines, synthetic experiment generators, and a CLI harness.
"""

from .baselines import (
    PermutationResult,
    crossfit_permutation_test,
    hsic_u_stat,
    mmd2_u_stat,
    plugin_hsic_stat,
    split_fit_test,
)
from .crossfit import (
    Dataset,
    FoldNuisance,
    FoldPlan,
    NuisanceConfig,
    fit_fold_nuisances,
    fit_fold_regressions,
    make_folds,
)
from .estimator import (
    GramStore,
    PairComputer,
    build_gram_store,
    fold_pair_inner,
    u_statistic,
    v_statistic,
)
from .inference import (
    DiagnosticUndefined,
    InferenceReport,
    bootstrap_quantile,
    delta_ci,
    diagnostic_ratio,
    infer_from_gram,
    run_inference,
    sigma_hat_sq,
    triangle_ci,
    union_ci,
)
from .kernels import (
    KernelError,
    KernelSpec,
    discrete_spec,
    eval_grad_gram,
    eval_gram,
    eval_mixed_gram,
    gaussian_spec,
    matern_spec,
    median_pairwise_distance,
    resolve_bandwidth,
    resolve_spec,
)
from .synthdata import (
    CausalPairConfig,
    CovariateGroupConfig,
    FourierAnmConfig,
    FourierAnmModel,
    OracleSignal,
    gen_causal_pair,
    gen_covariate_groups,
    gen_fourier_anm,
    make_fourier_model,
    oracle_signal,
    read_dataset,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "CausalPairConfig",
    "CovariateGroupConfig",
    "Dataset",
    "DiagnosticUndefined",
    "FoldNuisance",
    "FoldPlan",
    "FourierAnmConfig",
    "FourierAnmModel",
    "GramStore",
    "InferenceReport",
    "KernelError",
    "KernelSpec",
    "NuisanceConfig",
    "OracleSignal",
    "PairComputer",
    "PermutationResult",
    "bootstrap_quantile",
    "build_gram_store",
    "crossfit_permutation_test",
    "delta_ci",
    "diagnostic_ratio",
    "discrete_spec",
    "eval_grad_gram",
    "eval_gram",
    "eval_mixed_gram",
    "fit_fold_nuisances",
    "fit_fold_regressions",
    "fold_pair_inner",
    "gaussian_spec",
    "gen_causal_pair",
    "gen_covariate_groups",
    "gen_fourier_anm",
    "hsic_u_stat",
    "infer_from_gram",
    "make_folds",
    "make_fourier_model",
    "matern_spec",
    "median_pairwise_distance",
    "mmd2_u_stat",
    "oracle_signal",
    "plugin_hsic_stat",
    "read_dataset",
    "resolve_bandwidth",
    "resolve_spec",
    "run_inference",
    "sigma_hat_sq",
    "split_fit_test",
    "triangle_ci",
    "u_statistic",
    "union_ci",
    "v_statistic",
    "write_dataset",
]
