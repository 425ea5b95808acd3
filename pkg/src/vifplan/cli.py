"""Command line interface.

Commands: vif, plan, breakeven, score, simulate, gen-data. Tabular
outputs go to stdout or, with --out, to CSV files with full-precision
(17 significant digit) decimals; every command also emits a run manifest
covering the inputs that affect its results.

Exit codes: 0 success, 2 domain/validation error, 3 simulation-quality
error (too many redraws), 4 cross-route discrepancy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, synth, theory
from .dataset import (
    Binary,
    Categorical,
    Continuous,
    CovariateKind,
    Dataset,
    ModelSpec,
    build_design,
    enumerate_models,
    format_load_report,
    load_csv,
)
from .errors import DomainError, TooManyRedraws, VifplanError
from .sim import Scheme, SimConfig, run_simulation
from .theory import BreakEvenRule
from .vif import (
    chi_square,
    contingency,
    rao_bridge,
    vif_from_chi_square,
    vif_quadratic,
    vif_regression,
)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_SIM_QUALITY = 3
EXIT_ROUTE_DISCREPANCY = 4

ROUTE_AGREEMENT_TOL = 1e-8


def _fmt(x) -> str:
    """Full-precision decimal, or 'undef' for missing values."""
    if x is None:
        return "undef"
    return format(float(x), ".17g")


def _fmt6(x) -> str:
    if x is None:
        return "undef"
    return format(float(x), ".6f")


def _print_table(header: list[str], rows: list[list[str]]) -> None:
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------

def _digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(argv: list[str], params: dict, seed: int | None, dataset_digest: str | None) -> dict:
    payload = dict(params)
    payload["version"] = __version__
    if seed is not None:
        payload["seed"] = seed
    if dataset_digest is not None:
        payload["dataset_digest"] = dataset_digest
    return {
        "command_line": " ".join(argv),
        "config_digest": _digest(payload),
        "seed": seed,
        "version": __version__,
        "dataset_digest": dataset_digest,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _emit_manifest(manifest: dict, out_dir: str | None) -> None:
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    if out_dir is not None:
        with open(os.path.join(out_dir, "manifest.json"), "w") as f:
            f.write(text)
    else:
        print("manifest: " + json.dumps(manifest, sort_keys=True))


# ---------------------------------------------------------------------------
# schema parsing
# ---------------------------------------------------------------------------

def _split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        if ch == "," and depth == 0:
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    items.append("".join(cur))
    return [s.strip() for s in items if s.strip()]


def parse_schema_spec(text: str) -> dict[str, CovariateKind | str]:
    """Parse 'name:kind' items; kind is continuous, binary or categorical,
    optionally with explicit labels as kind(a|b|...). Entries without labels
    map to the kind name and get labels inferred from the data later."""
    schema: dict[str, CovariateKind | str] = {}
    for item in _split_top_level(text):
        if ":" not in item:
            raise VifplanError(f"covariate spec {item!r} is not of the form name:kind")
        name, kind_text = item.split(":", 1)
        name, kind_text = name.strip(), kind_text.strip()
        if not name or name in schema:
            raise VifplanError(f"bad or duplicate covariate name in {item!r}")
        labels: tuple[str, ...] | None = None
        if "(" in kind_text:
            base, _, rest = kind_text.partition("(")
            if not rest.endswith(")"):
                raise VifplanError(f"unbalanced parentheses in {item!r}")
            labels = tuple(lab.strip() for lab in rest[:-1].split("|"))
            kind_text = base.strip()
        kind_text = kind_text.lower()
        if kind_text == "continuous":
            if labels is not None:
                raise VifplanError(f"continuous covariate {name!r} takes no labels")
            schema[name] = Continuous()
        elif kind_text == "binary":
            schema[name] = Binary((labels[0], labels[1])) if labels else "binary"
        elif kind_text == "categorical":
            schema[name] = Categorical(labels) if labels else "categorical"
        else:
            raise VifplanError(f"unknown covariate kind {kind_text!r} (expected continuous/binary/categorical)")
    return schema


def _infer_labels(path: str, column: str) -> tuple[str, ...]:
    import csv as _csv

    values: set[str] = set()
    with open(path, newline="") as f:
        reader = _csv.reader(f)
        header = next(reader, None)
        if header is None or column not in [h.strip() for h in header]:
            raise VifplanError(f"column {column!r} not found in {path}")
        idx = [h.strip() for h in header].index(column)
        for row in reader:
            if idx < len(row) and row[idx].strip():
                values.add(row[idx].strip())
    return tuple(sorted(values))


def _load_dataset(args) -> tuple[Dataset, dict[str, CovariateKind], str]:
    schema_spec = parse_schema_spec(args.covariates)
    schema: dict[str, CovariateKind] = {}
    for name, decl in schema_spec.items():
        if decl == "binary":
            labels = _infer_labels(args.data, name)
            if len(labels) != 2:
                raise VifplanError(
                    f"binary covariate {name!r} has {len(labels)} distinct values in the data"
                )
            schema[name] = Binary(labels)
        elif decl == "categorical":
            schema[name] = Categorical(_infer_labels(args.data, name))
        else:
            schema[name] = decl
    with open(args.data, newline="") as f:
        d = load_csv(f, schema, args.treatment, args.outcome)
    return d, schema, _file_digest(args.data)


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--treatment", required=True, help="treatment column name")
    p.add_argument("--covariates", required=True,
                   help="comma list of name:kind; kind = continuous | binary | categorical, "
                        "optionally with labels, e.g. sex:binary(F|M),age:continuous")
    p.add_argument("--outcome", default=None, help="optional outcome column name")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_data(args, argv) -> int:
    text = synth.synthetic_trial_csv(n=args.n, seed=args.seed)
    with open(args.out, "w", newline="") as f:
        f.write(text)
    digest = _file_digest(args.out)
    print(f"wrote {args.out} ({args.n} subjects, seed {args.seed})")
    _emit_manifest(_manifest(argv, {"command": "gen-data", "n": args.n}, args.seed, digest), None)
    return EXIT_OK


def cmd_vif(args, argv) -> int:
    d, schema, digest = _load_dataset(args)
    print(format_load_report(d))
    model_names = tuple(_split_top_level(args.model)) if args.model else d.covariate_names
    model = ModelSpec(model_names)
    design = build_design(d, model)
    print(f"model: {model} (k={design.k}, rank={design.rank})")

    wanted = set(_split_top_level(args.routes)) if args.routes != "auto" else None
    single_categorical = (
        len(model.covariate_names) == 1
        and isinstance(d.covariate(model.covariate_names[0]).kind, (Binary, Categorical))
    )

    results: dict[str, float] = {}
    rows: list[list[str]] = []

    def want(name: str) -> bool:
        return wanted is None or name in wanted

    if want("regression"):
        res = vif_regression(design, d.treatment)
        results["regression"] = res.lambda_
        rows.append(["regression", _fmt(res.lambda_), _fmt(res.r_squared_z),
                     str(res.n1), str(res.n2), str(res.k)])
    if want("quadratic") and design.k >= 1:
        if design.rank == design.k:
            res = vif_quadratic(design, d.treatment)
            lam = res.lambda_ + (args.inject_route_error or 0.0)
            results["quadratic"] = lam
            rows.append(["quadratic", _fmt(lam), _fmt(res.r_squared_z),
                         str(res.n1), str(res.n2), str(res.k)])
        else:
            rows.append(["quadratic", "skipped (rank deficient)", "", "", "", ""])
    if want("rao") and design.k >= 1 and d.n > design.k + 1:
        if design.rank == design.k:
            bridge = rao_bridge(design, d.treatment)
            results["rao"] = bridge.lambda_
            rows.append(["rao", _fmt(bridge.lambda_),
                         f"d2={_fmt(bridge.d2_mv)} f={_fmt(bridge.f_rao)}", "", "", ""])
        else:
            rows.append(["rao", "skipped (rank deficient)", "", "", "", ""])
    if want("chi2") and single_categorical:
        table = contingency(d, model.covariate_names[0])
        res = vif_from_chi_square(table)
        results["chi2"] = res.lambda_
        rows.append(["chi2", _fmt(res.lambda_), _fmt(res.r_squared_z),
                     str(res.n1), str(res.n2), str(res.k)])

    _print_table(["route", "lambda", "r_squared_z", "n1", "n2", "k"], rows)

    if single_categorical:
        table = contingency(d, model.covariate_names[0])
        chi = chi_square(table)
        print(f"\ncontingency table for {model.covariate_names[0]!r}:")
        _print_table(
            ["arm", *table.category_labels, "total"],
            [[d.arms[0], *(str(c) for c in table.counts[0]), str(table.n1)],
             [d.arms[1], *(str(c) for c in table.counts[1]), str(table.n2)],
             ["chi2_j", *(_fmt(v) for v in chi.per_category), _fmt(chi.chi2)]],
        )
        print(f"chi2 = {_fmt(chi.chi2)}  r_squared = {_fmt(chi.r_squared)}")

    manifest = _manifest(argv, {"command": "vif", "model": list(model.covariate_names)},
                         None, digest)
    _emit_manifest(manifest, None)

    if len(results) >= 2:
        vals = sorted(results.values())
        spread = vals[-1] - vals[0]
        print(f"max cross-route discrepancy: {_fmt(spread)}")
        if spread > ROUTE_AGREEMENT_TOL:
            print(f"error: routes disagree beyond {ROUTE_AGREEMENT_TOL}", file=sys.stderr)
            return EXIT_ROUTE_DISCREPANCY
    return EXIT_OK


def cmd_plan(args, argv) -> int:
    n_eff = args.n - args.extra_dof
    if args.extra_dof:
        print(f"centre-adjusted: effective N = {n_eff} (extra dof {args.extra_dof}), "
              f"nu = {n_eff - 2}")
    header = ["k", "e_vif", "var_vif", "sd_vif", "t_variance", "fisher_factor"]
    if args.rmse_ratio is not None:
        header.append("combined")
    rows: list[list[str]] = []
    for k in range(args.k_max + 1):
        mom = theory.vif_moments(n_eff, k)
        sd = None if mom.vif_variance is None else float(np.sqrt(mom.vif_variance))
        try:
            tvar = theory.t_variance(n_eff, k)
        except DomainError:
            tvar = None
        try:
            fisher = theory.fisher_precision_factor(n_eff - 2 - k)
        except DomainError:
            fisher = None
        row = [str(k), _fmt(mom.expected_vif), _fmt(mom.vif_variance), _fmt(sd),
               _fmt(tvar), _fmt(fisher)]
        if args.rmse_ratio is not None:
            try:
                row.append(_fmt(theory.three_factor_budget(n_eff, k, args.rmse_ratio).combined))
            except DomainError:
                row.append("undef")
        rows.append(row)
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
    else:
        _print_table(header, rows)
    _emit_manifest(_manifest(argv, {"command": "plan", "n": args.n, "k_max": args.k_max,
                                    "extra_dof": args.extra_dof,
                                    "rmse_ratio": args.rmse_ratio}, None, None), None)
    return EXIT_OK


def cmd_breakeven(args, argv) -> int:
    if args.nu_to < args.nu_from:
        raise VifplanError("--nu-to must be >= --nu-from")
    header = ["nu", "simple", "rule_of_thumb", "fisher"]
    rows = []
    for nu in range(args.nu_from, args.nu_to + 1):
        row = [str(nu)]
        for rule in (BreakEvenRule.SIMPLE, BreakEvenRule.RULE_OF_THUMB, BreakEvenRule.FISHER):
            try:
                row.append(_fmt(theory.breakeven(rule, nu)))
            except DomainError:
                row.append("undef")
        rows.append(row)
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
    else:
        _print_table(header, rows)
    _emit_manifest(_manifest(argv, {"command": "breakeven", "nu_from": args.nu_from,
                                    "nu_to": args.nu_to}, None, None), None)
    return EXIT_OK


def cmd_score(args, argv) -> int:
    vif_ratio, rmse_ratio = theory.historical_score_ratios(
        args.n, args.k, args.rho_current, args.rho_historical
    )
    product = vif_ratio * rmse_ratio
    print(f"vif_ratio = {_fmt(vif_ratio)}")
    print(f"rmse_ratio = {_fmt(rmse_ratio)}")
    print(f"product = {_fmt(product)}")
    # product is (cost of fitting the covariates anew) / (cost of the score)
    if abs(product - 1.0) <= 1e-12:
        print("verdict: break-even")
    elif product < 1.0:
        print("verdict: fitting the covariates anew is favored (product < 1)")
    else:
        print("verdict: the historical score is favored (product > 1)")
    _emit_manifest(_manifest(argv, {"command": "score", "n": args.n, "k": args.k,
                                    "rho_current": args.rho_current,
                                    "rho_historical": args.rho_historical}, None, None), None)
    return EXIT_OK


_SCHEME_BY_NAME = {s.value: s for s in Scheme}


def cmd_simulate(args, argv) -> int:
    d, schema, digest = _load_dataset(args)
    scheme_names = _split_top_level(args.schemes)
    try:
        schemes = tuple(_SCHEME_BY_NAME[s] for s in scheme_names)
    except KeyError as e:
        raise VifplanError(f"unknown scheme {e.args[0]!r}; pick from "
                           f"{sorted(_SCHEME_BY_NAME)}") from None
    models = tuple(enumerate_models(d.covariate_names))
    cfg = SimConfig(
        schemes=schemes,
        models=models,
        replicates=args.reps,
        seed=args.seed,
        max_redraws=args.max_redraws,
        fixed_margin_permutation=args.fixed_margins,
    )
    os.makedirs(args.out, exist_ok=True)
    cells = run_simulation(d, cfg, jobs=args.jobs)

    header = ["scheme", "model", "k", "mean_lambda", "var_lambda", "mc_se",
              "theory_mean", "theory_var", "redraws", "m_effective", "dropped",
              "supported"]
    rows = []
    for c in cells:
        rows.append([
            c.scheme.value, str(c.model), str(c.k), _fmt(c.mean_lambda),
            _fmt(c.var_lambda), _fmt(c.mc_se_mean), _fmt(c.theory_mean),
            _fmt(c.theory_var), str(c.redraw_count), str(c.m_effective),
            str(c.dropped), "true" if c.supported else "false",
        ])
    _write_csv(os.path.join(args.out, "results.csv"), header, rows)

    summary = {
        "version": __version__,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "max_redraws": cfg.max_redraws,
        "fixed_margin_permutation": cfg.fixed_margin_permutation,
        "schemes": [s.value for s in cfg.schemes],
        "n": d.n,
        "n1": d.n1,
        "n2": d.n2,
        "covariates": list(d.covariate_names),
        "n_models": len(models),
        "total_redraws": sum(c.redraw_count for c in cells),
        "total_dropped": sum(c.dropped for c in cells),
        "cells": [
            {
                "scheme": c.scheme.value,
                "model": list(c.model.covariate_names),
                "k": c.k,
                "m_effective": c.m_effective,
                "mean_lambda": c.mean_lambda,
                "var_lambda": c.var_lambda,
                "mc_se": c.mc_se_mean,
                "theory_mean": c.theory_mean,
                "theory_var": c.theory_var,
                "redraws": c.redraw_count,
                "dropped": c.dropped,
                "supported": c.supported,
            }
            for c in cells
        ],
    }
    with open(os.path.join(args.out, "summary.json"), "w") as f:
        f.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")

    params = {
        "command": "simulate",
        "schemes": [s.value for s in cfg.schemes],
        "replicates": cfg.replicates,
        "max_redraws": cfg.max_redraws,
        "fixed_margin_permutation": cfg.fixed_margin_permutation,
        "covariates": list(d.covariate_names),
        "treatment": args.treatment,
        "outcome": args.outcome,
    }
    _emit_manifest(_manifest(argv, params, cfg.seed, digest), args.out)
    print(f"wrote {len(cells)} cells to {args.out} "
          f"(total redraws {summary['total_redraws']}, dropped {summary['total_dropped']})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vifplan",
        description="Variance inflation factors for covariate adjustment in "
                    "two-arm randomised trials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic stand-in dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=synth.DEFAULT_N)
    p.add_argument("--seed", type=int, default=synth.DEFAULT_SEED)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("vif", help="observed VIF by all applicable routes")
    _add_dataset_flags(p)
    p.add_argument("--model", default=None,
                   help="comma list of covariates to fit (default: all declared)")
    p.add_argument("--routes", default="auto",
                   help="comma list from regression,quadratic,rao,chi2 (default: all applicable)")
    p.add_argument("--inject-route-error", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_vif)

    p = sub.add_parser("plan", help="planning table of moments and budgets")
    p.add_argument("--n", type=int, required=True, help="total subjects")
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--extra-dof", type=int, default=0,
                   help="extra intercepts consumed (e.g. centres); uses nu = N - c - 2")
    p.add_argument("--rmse-ratio", type=float, default=None)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("breakeven", help="break-even partial correlations by rule")
    p.add_argument("--nu-from", type=int, required=True)
    p.add_argument("--nu-to", type=int, required=True)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("score", help="historical score versus fitting covariates anew")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho-current", type=float, required=True)
    p.add_argument("--rho-historical", type=float, required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="full Monte Carlo study over all models")
    _add_dataset_flags(p)
    p.add_argument("--schemes", default="permutation,mvn,bootstrap")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-redraws", type=int, default=100)
    p.add_argument("--fixed-margins", action="store_true",
                   help="permute the original labels instead of Bernoulli(1/2)")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except TooManyRedraws as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SIM_QUALITY
    except VifplanError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
