"""Detecting group-dependent noise after adjusting for a covariate.

Two-arm design: a binary group label X, a continuous covariate T, and an
outcome whose mean depends smoothly on both. Under the null both arms share
the same noise scale; under the alternative the scales differ (0.35 vs
0.55) while the means are identical. A mean-based comparison cannot tell
the arms apart; the residual-covariate dependence test can, because with a
binary label the residual-distribution contrast it measures is exactly a
kernel two-sample (MMD) contrast between the arms.

We also run the plug-in permutation baseline, which refits nothing under
permutation and is the natural benchmark.

Run:  python3 demos/covariate_groups.py
"""

from debiased_hsic import (
    CovariateGroupConfig,
    crossfit_permutation_test,
    gen_covariate_groups,
    run_inference,
)


def main():
    for arm in ("null", "alternative"):
        data, _ = gen_covariate_groups(CovariateGroupConfig(arm, seed=7))
        report, _ = run_inference(data, K=5, B=1000, alpha=0.05, seed=7)
        perm = crossfit_permutation_test(data, K=5, B_perm=999, alpha=0.05, seed=7)
        sig0, sig1 = CovariateGroupConfig(arm, seed=7).sigmas()
        print(f"\n--- {arm} arm (noise scales {sig0} vs {sig1}, n = {data.n}) ---")
        print(f"  debiased test : reject={report.reject_null}  "
              f"p~{report.p_value_surrogate:.3f}")
        print(f"  permutation   : reject={perm.reject}  p={perm.p_value:.3f}")

    print("\nBoth tests should retain the null arm; the alternative arm has")
    print("equal means, so any rejection there is driven purely by the")
    print("group-dependent residual distribution.")


if __name__ == "__main__":
    main()
