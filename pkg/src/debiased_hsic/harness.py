"""Command-line front end.

Subcommands:

* ``test``     — run the debiased pipeline on one dataset (file or generator)
  and write a JSON report.
* ``sweep``    — Monte-Carlo replication sweep over generator settings and
  sample sizes; per-replication CSV plus a sibling aggregate CSV.
* ``arrow``    — two-direction goodness-of-fit comparison for a bivariate
  pair; reports both decisions and an arrow verdict.
* ``baseline`` — plug-in permutation baselines (split or cross-fitted).

Configs are flat ``key=value`` text files; CLI flags override config values.
Every output records a hash of the effective configuration. Replications
parallelize over a thread pool; results are written in replication order and
all randomness is keyed per replication, so outputs are independent of the
thread count.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import rng
from .baselines import PermutationResult, crossfit_permutation_test, split_fit_test
from .crossfit import Dataset
from .inference import run_inference
from .kernels import KernelSpec, discrete_spec, gaussian_spec
from .synthdata import (
    CausalPairConfig,
    CovariateGroupConfig,
    FourierAnmConfig,
    OracleSignal,
    gen_causal_pair,
    gen_covariate_groups,
    make_fourier_model,
    oracle_signal,
    read_dataset,
)

THREADS_ENV_VAR = "DEBIASED_HSIC_THREADS"

CSV_COLUMNS = [
    "generator", "setting", "n", "method", "rep",
    "reject", "ci_lo", "ci_hi", "union_includes_zero",
    "q_v", "q_u", "sigma_sq", "zeta", "diagnostic", "p_value",
    "oracle_norm", "oracle_hsic", "covered", "config_hash",
]

AGG_COLUMNS = [
    "generator", "setting", "n", "method", "R",
    "rejection_fraction", "rejection_se",
    "coverage_fraction", "coverage_se", "config_hash",
]

DEBIASED_METHODS = ("debiased-bootstrap", "debiased-delta", "triangle-ci", "union-ci")
DEFAULT_METHODS = "debiased-bootstrap,debiased-delta,triangle-ci,union-ci,crossfit-perm,split-perm(0.5)"


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def config_hash(cfg: dict[str, str]) -> str:
    """Hash of the statistically meaningful configuration.

    Output location is excluded: where results are written does not change
    what was computed.
    """
    blob = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg) if k != "out")
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _float_list(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip() != ""]


def _int_list(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip() != ""]


@dataclass(frozen=True)
class Setting:
    """One generator configuration inside a sweep."""

    generator: str
    label: str
    spec_k: KernelSpec
    make_data: object  # (n, seed) -> Dataset
    oracle_sampler: object  # (n, seed) -> (Dataset, oracle residuals)


def _build_settings(cfg: dict[str, str], master_seed: int) -> list[Setting]:
    gen = cfg.get("generator", "fourier")
    if gen == "fourier":
        s_m = float(cfg.get("s_m", "1.0"))
        s_eps = float(cfg.get("s_eps", "0.75"))
        rhos = _float_list(cfg.get("rho", "0.0"))
        fn_seed = int(cfg.get("function_seed", str(master_seed)))
        settings = []
        for rho in rhos:
            model = make_fourier_model(
                FourierAnmConfig(s_m=s_m, s_eps=s_eps, rho=rho, n=1, seed=fn_seed, function_seed=fn_seed)
            )
            settings.append(Setting(
                generator=gen,
                label=f"rho={rho:g}",
                spec_k=gaussian_spec(),
                make_data=lambda n, seed, m=model: m.sample(n, seed)[0],
                oracle_sampler=lambda n, seed, m=model: m.sample(n, seed),
            ))
        return settings
    if gen == "groups":
        arms = [a.strip() for a in cfg.get("arm", "null").split(",")]
        return [Setting(
            generator=gen,
            label=f"arm={arm}",
            spec_k=discrete_spec(),
            make_data=lambda n, seed, a=arm: gen_covariate_groups(CovariateGroupConfig(a, seed, n))[0],
            oracle_sampler=lambda n, seed, a=arm: gen_covariate_groups(CovariateGroupConfig(a, seed, n)),
        ) for arm in arms]
    if gen == "pair":
        rhos = _float_list(cfg.get("rho", "0.0"))
        def fwd(n, seed, rho):
            forward, _, xi = gen_causal_pair(CausalPairConfig(rho, n, seed))
            return forward, xi
        return [Setting(
            generator=gen,
            label=f"rho={rho:g}",
            spec_k=gaussian_spec(),
            make_data=lambda n, seed, r=rho: fwd(n, seed, r)[0],
            oracle_sampler=lambda n, seed, r=rho: fwd(n, seed, r),
        ) for rho in rhos]
    raise ValueError(f"unknown generator {gen!r} (expected fourier, groups, or pair)")


def _rep_seed(master_seed: int, setting_idx: int, n: int, rep: int) -> int:
    """Deterministic per-replication seed, independent of execution order."""
    return int(rng.stream(master_seed, "rep-seed", setting_idx, n, rep).integers(2**31))


def _parse_methods(spec: str) -> list[tuple[str, float | None]]:
    methods = []
    for token in (t.strip() for t in spec.split(",")):
        if not token:
            continue
        if token.startswith("split-perm(") and token.endswith(")"):
            methods.append(("split-perm", float(token[len("split-perm("):-1])))
        elif token in DEBIASED_METHODS or token == "crossfit-perm":
            methods.append((token, None))
        else:
            raise ValueError(f"unknown method {token!r}")
    if not methods:
        raise ValueError("empty method list")
    return methods


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _blank_row(setting: Setting, n: int, method: str, rep: int, chash: str) -> dict:
    row = {c: "" for c in CSV_COLUMNS}
    row.update(generator=setting.generator, setting=setting.label, n=n,
               method=method, rep=rep, config_hash=chash)
    return row


def _rows_for_rep(
    setting: Setting,
    n: int,
    rep: int,
    methods: list[tuple[str, float | None]],
    oracle: OracleSignal | None,
    params: dict,
    chash: str,
) -> list[dict]:
    seed = _rep_seed(params["seed"], params["setting_idx"], n, rep)
    data = setting.make_data(n, seed)
    rows = []

    wanted = [m for m, _ in methods]
    if any(m in DEBIASED_METHODS for m in wanted):
        report, _ = run_inference(
            data, K=params["K"], B=params["B"], alpha=params["alpha"],
            beta=params["beta"], seed=seed, spec_k=setting.spec_k,
        )
        for method, _ in methods:
            if method not in DEBIASED_METHODS:
                continue
            row = _blank_row(setting, n, method, rep, chash)
            row.update(q_v=report.q_v, q_u=report.q_u, sigma_sq=report.sigma_sq,
                       zeta=report.zeta, diagnostic=report.diagnostic)
            if method == "debiased-bootstrap":
                row.update(reject=report.reject_null, p_value=report.p_value_surrogate)
            elif method == "triangle-ci":
                row.update(ci_lo=report.triangle_lo, ci_hi=report.triangle_hi)
                if oracle is not None:
                    row.update(oracle_norm=oracle.norm,
                               covered=report.triangle_lo <= oracle.norm <= report.triangle_hi)
            elif method == "debiased-delta":
                row.update(ci_lo=report.delta_lo, ci_hi=report.delta_hi)
                if oracle is not None:
                    row.update(oracle_hsic=oracle.hsic,
                               covered=report.delta_lo <= oracle.hsic <= report.delta_hi)
            else:  # union-ci: delta interval, plus {0} iff triangle covers 0
                row.update(ci_lo=report.delta_lo, ci_hi=report.delta_hi,
                           union_includes_zero=report.union_includes_zero)
                if oracle is not None:
                    covered = (report.delta_lo <= oracle.hsic <= report.delta_hi) or (
                        report.union_includes_zero and oracle.hsic == 0.0
                    )
                    row.update(oracle_hsic=oracle.hsic, covered=covered)
            rows.append(row)

    for method, fraction in methods:
        if method == "crossfit-perm":
            res = crossfit_permutation_test(
                data, K=params["K"], B_perm=params["B_perm"],
                alpha=params["alpha"], seed=seed, spec_k=setting.spec_k,
            )
        elif method == "split-perm":
            res = split_fit_test(
                data, train_fraction=fraction, B_perm=params["B_perm"],
                alpha=params["alpha"], seed=seed, spec_k=setting.spec_k,
            )
        else:
            continue
        name = method if fraction is None else f"split-perm({fraction:g})"
        row = _blank_row(setting, n, name, rep, chash)
        row.update(reject=res.reject, p_value=res.p_value)
        rows.append(row)
    return rows


def run_sweep(cfg: dict[str, str], threads: int) -> tuple[str, str]:
    """Execute a sweep config; returns (per-rep CSV path, aggregate CSV path)."""
    master_seed = int(cfg.get("seed", "0"))
    settings = _build_settings(cfg, master_seed)
    n_grid = _int_list(cfg.get("n", "250"))
    R = int(cfg.get("R", "200"))
    if R < 1:
        raise ValueError("replication count must be >= 1")
    methods = _parse_methods(cfg.get("methods", DEFAULT_METHODS))
    out = cfg.get("out", "sweep.csv")
    chash = config_hash(cfg)
    params = {
        "seed": master_seed,
        "K": int(cfg.get("K", "5")),
        "B": int(cfg.get("B", "1000")),
        "B_perm": int(cfg.get("B_perm", "1000")),
        "alpha": float(cfg.get("alpha", "0.05")),
        "beta": float(cfg.get("beta", "0.05")),
    }
    oracle_N = int(cfg.get("oracle_N", "200000"))
    need_oracle = any(m in ("triangle-ci", "debiased-delta", "union-ci") for m, _ in methods)

    rows: list[dict] = []
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        for si, setting in enumerate(settings):
            oracle = (
                oracle_signal(setting.oracle_sampler, oracle_N,
                              seed=master_seed, spec_k=setting.spec_k)
                if need_oracle else None
            )
            for n in n_grid:
                task_params = dict(params, setting_idx=si)
                futures = [
                    pool.submit(_rows_for_rep, setting, n, rep, methods, oracle, task_params, chash)
                    for rep in range(R)
                ]
                for fut in futures:  # submission order => deterministic file order
                    rows.extend(fut.result())

    with open(out, "w", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _fmt(row[c]) for c in CSV_COLUMNS})

    agg_path = _aggregate_path(out)
    write_aggregates(rows, agg_path, chash)
    return out, agg_path


def _aggregate_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return f"{stem}.agg{ext or '.csv'}"


def write_aggregates(rows: list[dict], path: str, chash: str) -> None:
    """Rejection and coverage fractions with binomial standard errors."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["generator"], row["setting"], row["n"], row["method"]), []).append(row)

    def _binomial(values: list[bool]):
        if not values:
            return "", ""
        p = sum(values) / len(values)
        return p, math.sqrt(p * (1.0 - p) / len(values))

    with open(path, "w", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=AGG_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for (gen, setting, n, method), members in groups.items():
            rej, rej_se = _binomial([bool(r["reject"]) for r in members if r["reject"] != ""])
            cov, cov_se = _binomial([bool(r["covered"]) for r in members if r["covered"] != ""])
            writer.writerow({
                "generator": gen, "setting": setting, "n": n, "method": method,
                "R": len(members),
                "rejection_fraction": _fmt(rej), "rejection_se": _fmt(rej_se),
                "coverage_fraction": _fmt(cov), "coverage_se": _fmt(cov_se),
                "config_hash": chash,
            })


def read_results_csv(path: str) -> list[dict]:
    """Parse a per-replication CSV back into typed rows (round-trip inverse)."""
    bool_cols = {"reject", "union_includes_zero", "covered"}
    float_cols = {"ci_lo", "ci_hi", "q_v", "q_u", "sigma_sq", "zeta",
                  "diagnostic", "p_value", "oracle_norm", "oracle_hsic"}
    int_cols = {"n", "rep"}
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, val in raw.items():
                if val == "":
                    row[key] = ""
                elif key in bool_cols:
                    row[key] = val == "1"
                elif key in float_cols:
                    row[key] = float(val)
                elif key in int_cols:
                    row[key] = int(val)
                else:
                    row[key] = val
            rows.append(row)
    return rows


def _load_dataset(args, cfg: dict[str, str]) -> Dataset:
    if args.data is not None:
        return read_dataset(args.data)
    gen = cfg.get("generator")
    if gen is None:
        raise ValueError("provide --data FILE or a config with a generator")
    seed = int(cfg.get("seed", "0"))
    n = int(cfg.get("n", "250"))
    setting = _build_settings(cfg, seed)[0]
    return setting.make_data(n, seed)


def _effective_config(args, base: dict[str, str]) -> dict[str, str]:
    cfg = dict(base)
    for key, attr in (("seed", "seed"), ("K", "folds"), ("alpha", "alpha"),
                      ("beta", "beta"), ("B", "bootstrap"), ("B_perm", "perms"),
                      ("out", "out")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(val)
    if args.data is not None:
        cfg["data"] = args.data
    return cfg


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _spec_k_from_config(cfg: dict[str, str]) -> KernelSpec | None:
    name = cfg.get("kernel_x")
    if name is None:
        return discrete_spec() if cfg.get("generator") == "groups" else None
    if name == "gaussian":
        return gaussian_spec()
    if name == "discrete":
        return discrete_spec()
    raise ValueError(f"unknown kernel_x {name!r}")


def cmd_test(args) -> int:
    cfg = _effective_config(args, parse_config_file(args.config) if args.config else {})
    data = _load_dataset(args, cfg)
    report, _ = run_inference(
        data,
        K=int(cfg.get("K", "5")),
        B=int(cfg.get("B", "1000")),
        alpha=float(cfg.get("alpha", "0.05")),
        beta=float(cfg.get("beta", cfg.get("alpha", "0.05"))),
        seed=int(cfg.get("seed", "0")),
        spec_k=_spec_k_from_config(cfg),
    )
    _emit_json({"report": report.to_dict(), "config_hash": config_hash(cfg)}, args.out)
    return 0


def cmd_arrow(args) -> int:
    cfg = _effective_config(args, parse_config_file(args.config) if args.config else {})
    data = _load_dataset(args, cfg)
    if data.X.shape[1] != 1 or data.d_y != 1:
        raise ValueError("arrow comparison needs a bivariate pair (d_x = d_y = 1)")
    kwargs = dict(
        K=int(cfg.get("K", "5")),
        B=int(cfg.get("B", "1000")),
        alpha=float(cfg.get("alpha", "0.05")),
        beta=float(cfg.get("beta", cfg.get("alpha", "0.05"))),
        seed=int(cfg.get("seed", "0")),
    )
    forward, _ = run_inference(data, **kwargs)
    reverse_data = Dataset(X=data.Y, W=data.Y, Y=data.X[:, 0])
    reverse, _ = run_inference(reverse_data, **kwargs)
    if forward.reject_null and reverse.reject_null:
        verdict = "both-rejected"
    elif forward.reject_null:
        verdict = "reverse"
    elif reverse.reject_null:
        verdict = "forward"
    else:
        verdict = "undecided"
    _emit_json({
        "forward": forward.to_dict(),
        "reverse": reverse.to_dict(),
        "verdict": verdict,
        "config_hash": config_hash(cfg),
    }, args.out)
    return 0


def cmd_baseline(args) -> int:
    cfg = _effective_config(args, parse_config_file(args.config) if args.config else {})
    data = _load_dataset(args, cfg)
    spec_k = _spec_k_from_config(cfg)
    common = dict(B_perm=int(cfg.get("B_perm", "1000")),
                  alpha=float(cfg.get("alpha", "0.05")),
                  seed=int(cfg.get("seed", "0")), spec_k=spec_k)
    if args.method == "crossfit":
        res: PermutationResult = crossfit_permutation_test(data, K=int(cfg.get("K", "5")), **common)
    else:
        res = split_fit_test(data, train_fraction=args.train_fraction, **common)
    _emit_json({
        "method": args.method,
        "observed": res.observed,
        "p_value": res.p_value,
        "reject": res.reject,
        "alpha": res.alpha,
        "B_perm": int(res.permuted.size),
        "config_hash": config_hash(cfg),
    }, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _effective_config(args, parse_config_file(args.config))
    out, agg = run_sweep(cfg, args.threads)
    sys.stdout.write(f"wrote {out} and {agg}\n")
    return 0


def _add_common_flags(p: argparse.ArgumentParser, with_data: bool = True):
    if with_data:
        p.add_argument("--data", help="dataset file (columnar text, x_*/w_*/y_* headers)")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--folds", type=int, help="number of cross-fitting folds")
    p.add_argument("--alpha", type=float, help="test / CI level")
    p.add_argument("--beta", type=float, help="diagnostic level")
    p.add_argument("--bootstrap", type=int, help="bootstrap draws")
    p.add_argument("--perms", type=int, help="permutation draws")
    p.add_argument("--out", help="output path (default: stdout for JSON commands)")
    p.add_argument(
        "--threads", type=int,
        default=int(os.environ.get(THREADS_ENV_VAR, "1")),
        help=f"worker threads (default from ${THREADS_ENV_VAR}, else 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debiased-hsic",
        description="Debiased cross-fitted kernel independence test and confidence intervals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the debiased pipeline on one dataset")
    _add_common_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("sweep", help="Monte-Carlo replication sweep")
    _add_common_flags(p, with_data=False)
    p.set_defaults(func=cmd_sweep, data=None)

    p = sub.add_parser("arrow", help="two-direction goodness-of-fit comparison")
    _add_common_flags(p)
    p.set_defaults(func=cmd_arrow)

    p = sub.add_parser("baseline", help="plug-in permutation baselines")
    _add_common_flags(p)
    p.add_argument("--method", choices=("split", "crossfit"), default="crossfit")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and args.config is None:
        build_parser().error("sweep requires --config")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
