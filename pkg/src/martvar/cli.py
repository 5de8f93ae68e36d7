"""Command-line driver for reproducible experiments.

Subcommands: generate (filtration / martingale / weight files), compute
(operator fields and certificates), verify (randomized suites with
calibration and holdout), search (adversarial constant search), and
report (render figures from emitted JSONL/CSV).  Exit codes: 0 success,
1 verification failure, 2 usage or config error.  Outputs embed their
manifests; rerunning a manifest reproduces every number.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import figures, reporting
from .filtration import dyadic_filtration, filtration_to_json, stick_filtration
from .inequalities import adversarial_search
from .martingale import martingale_from_json, martingale_to_json, random_martingale
from .operators import (
    conditional_square,
    dyadic_jump_majorant,
    jump_count_chain,
    jump_count_pointwise,
    maximal,
    square,
    variation,
    variation_pointwise,
)
from .suites import run_suite
from .weights import ainfty_profile, cascade_weight, weight_from_json, weight_to_json

PATH_SCHEMA = "martvar.path/1"

GENERATOR_ALIASES = {
    "rademacher": "dyadic_rademacher",
    "dyadic_rademacher": "dyadic_rademacher",
    "gaussian": "terminal_gaussian",
    "terminal_gaussian": "terminal_gaussian",
    "uniform": "uniform_terminal",
    "uniform_terminal": "uniform_terminal",
}


def _default_seed() -> int:
    return int(os.environ.get("MARTVAR_SEED", "0"))


def _manifest(command: str, params: dict, seed) -> dict:
    return {
        "command": command,
        "params": params,
        "seed": seed,
        "version": reporting.__version__,
    }


def _load_input(path: str):
    with open(path) as fh:
        obj = json.load(fh)
    schema = obj.get("schema", "")
    if schema == PATH_SCHEMA:
        return "path", np.asarray(obj["values"], dtype=float)
    if schema.startswith("martvar.martingale/"):
        return "martingale", martingale_from_json(obj)
    raise ValueError(f"unrecognized input schema {schema!r} in {path}")


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.kind == "filtration":
        if args.filtration == "dyadic":
            filt = dyadic_filtration(args.depth)
        else:
            filt = stick_filtration(args.depth)
        obj = filtration_to_json(filt)
        obj["manifest"] = _manifest("generate filtration", {"kind": args.filtration, "depth": args.depth}, None)
    elif args.kind == "martingale":
        gen = GENERATOR_ALIASES.get(args.gen)
        if gen is None:
            raise ValueError(f"unknown generator {args.gen!r}; choose from {sorted(set(GENERATOR_ALIASES))}")
        filt = stick_filtration(args.depth) if args.filtration == "stick" else dyadic_filtration(args.depth)
        f = random_martingale(filt, gen, seed, scale=args.scale)
        obj = martingale_to_json(f)
        obj["manifest"] = _manifest(
            "generate martingale",
            {"gen": gen, "depth": args.depth, "filtration": args.filtration, "scale": args.scale},
            seed,
        )
    else:
        w = cascade_weight(args.depth, args.rho, seed)
        obj = weight_to_json(w)
        obj["manifest"] = _manifest("generate weight", {"depth": args.depth, "rho": args.rho}, seed)
        if args.profile_csv:
            profile = ainfty_profile(w, dyadic_filtration(args.depth))
            reporting.profile_to_csv(args.profile_csv, profile)
    reporting.write_json(args.out, obj)
    print(f"wrote {args.kind} to {args.out}")
    return 0


def cmd_compute(args) -> int:
    kind, payload = _load_input(args.input)
    op = args.operator
    out = Path(args.out)
    if op in ("Vr", "majorant") and args.r is None:
        raise ValueError(f"operator {op} requires --r")
    if op == "Njump" and args.lam is None:
        raise ValueError("operator Njump requires --lambda")
    if kind == "path":
        path = payload
        if op == "Vr":
            cert = variation(path, args.r)
            reporting.write_json(out, {"operator": op, "r": args.r, "value": cert.value, "indices": list(cert.indices)})
        elif op == "Njump":
            chain = jump_count_chain(path, args.lam)
            reporting.write_json(
                out, {"operator": op, "lambda": args.lam, "count": chain.count, "indices": list(chain.indices)}
            )
        elif op == "majorant":
            value = dyadic_jump_majorant(path, args.r, args.tolerance)
            reporting.write_json(out, {"operator": op, "r": args.r, "tolerance": args.tolerance, "value": value})
        else:
            raise ValueError(f"operator {op} needs a martingale input, got a path")
        print(f"wrote {op} to {out}")
        return 0
    f = payload
    if op == "M":
        field = maximal(f)
    elif op == "S":
        field = square(f)
    elif op == "s":
        field = conditional_square(f)
    elif op == "Vr":
        field = variation_pointwise(f, args.r)
    elif op == "Njump":
        field = jump_count_pointwise(f, args.lam)
    else:  # majorant: per finest atom on its level path
        mat = f.cell_matrix()
        filt = f.filtration
        reps = [atom[0] for atom in filt.levels[filt.depth]]
        vals = np.array([dyadic_jump_majorant(mat[:, c], args.r, args.tolerance) for c in reps])
        field = vals[filt.atom_index[filt.depth]]
    if out.suffix == ".json":
        reporting.write_json(out, {"operator": op, "values": [float(v) for v in field]})
    else:
        reporting.field_to_csv(out, field, header=op)
    if args.certificates and op in ("Vr", "Njump"):
        _write_certificates(args.certificates, f, op, args)
    print(f"wrote per-cell {op} to {out}")
    return 0


def _write_certificates(path, f, op, args):
    """One witness per finest atom: the chain of levels achieving the value."""
    filt = f.filtration
    mat = f.cell_matrix()
    records = []
    for a, atom in enumerate(filt.levels[filt.depth]):
        path_vals = mat[:, atom[0]]
        if op == "Vr":
            cert = variation(path_vals, args.r)
            records.append({"atom": a, "value": cert.value, "indices": list(cert.indices)})
        else:
            chain = jump_count_chain(path_vals, args.lam)
            records.append({"atom": a, "count": chain.count, "indices": list(chain.indices)})
    reporting.write_jsonl(path, records)


def cmd_verify(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    if args.suite != config.get("suite"):
        raise ValueError(f"config suite {config.get('suite')!r} does not match requested {args.suite!r}")
    result = run_suite(config, threads=args.threads)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    violations = 0
    if "reports" in result:
        reports = result["reports"]
        violations = sum(not rep.passed for rep in reports)
        reporting.write_jsonl(out_dir / "reports.jsonl", reports)
        reporting.reports_to_csv(out_dir / "reports.csv", reports)
        summary = dict(result["summary"])
        summary["suite"] = result["suite"]
        summary["config"] = config
        reporting.write_json(out_dir / "summary.json", summary)
        print(f"{result['suite']}: {len(reports)} reports, {violations} violations -> {out_dir}")
    else:
        summaries = [s.to_json() for s in result["summaries"]]
        reporting.write_jsonl(out_dir / "summaries.jsonl", summaries)
        payload = {"suite": result["suite"], "config": config, "summaries": summaries}
        if "growth" in result:
            payload["growth"] = result["growth"]
        reporting.write_json(out_dir / "summary.json", payload)
        print(f"{result['suite']}: {len(summaries)} summaries -> {out_dir}")
    return 1 if violations else 0


def cmd_search(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    params = {}
    for item in args.param or []:
        key, _, value = item.partition("=")
        if not _:
            raise ValueError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    result = adversarial_search(args.objective, params, args.budget, seed)
    obj = result.to_json()
    obj["created_unix"] = time.time()
    reporting.write_json(args.out, obj)
    print(f"{args.objective}: best objective {result.best_objective:.6g} in {result.evaluations} evaluations")
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    produced = []
    if args.reports:
        records = reporting.read_jsonl(args.reports)
        report_lines = [r for r in records if "lhs" in r]
        summary_lines = [r for r in records if "ratios" in r]
        if report_lines:
            produced += figures.render_report_figures(report_lines, out_dir)
            reporting.reports_to_csv(out_dir / "report_lines.csv", report_lines)
        if summary_lines:
            produced += figures.render_summary_figures(summary_lines, out_dir)
    if args.weight:
        with open(args.weight) as fh:
            w = weight_from_json(json.load(fh))
        profile = ainfty_profile(w, dyadic_filtration(w.depth))
        reporting.profile_to_csv(out_dir / "concentration_profile.csv", profile)
        produced.append(figures.render_profile_figure(profile.gammas, profile.epsilons, out_dir))
    for path in produced:
        print(f"figure: {path}")
    if not produced:
        print("no renderable records found", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="martvar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a filtration, martingale, or weight file")
    g.add_argument("kind", choices=["filtration", "martingale", "weight"])
    g.add_argument("--depth", type=int, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--gen", default="gaussian", help="martingale generator (rademacher, gaussian, uniform)")
    g.add_argument("--filtration", choices=["dyadic", "stick"], default="dyadic")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=0.3, help="cascade oscillation bound for weights")
    g.add_argument("--profile-csv", default=None, help="also export the weight concentration profile")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compute", help="evaluate an operator on a serialized input")
    c.add_argument("operator", choices=["M", "S", "s", "Vr", "Njump", "majorant"])
    c.add_argument("--input", required=True)
    c.add_argument("--r", type=float, default=None)
    c.add_argument("--lambda", dest="lam", type=float, default=None)
    c.add_argument("--tolerance", type=float, default=1e-9)
    c.add_argument("--out", required=True, help="CSV for per-cell fields, or .json for a JSON array")
    c.add_argument("--certificates", default=None, help="also write per-atom witness chains (JSONL)")
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="run a verification suite from a config file")
    v.add_argument("suite", choices=["good_lambda", "lemma", "proof_chain", "weighted", "lepingle", "jumps", "bdg"])
    v.add_argument("--config", required=True)
    v.add_argument("--out-dir", required=True)
    v.add_argument("--threads", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", help="adversarial constant search")
    s.add_argument("--objective", required=True, choices=["good_lambda_constant", "lepingle_ratio", "jump_ratio"])
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--param", action="append", help="objective parameter as key=value (JSON values)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_search)

    r = sub.add_parser("report", help="render figures from emitted JSONL reports")
    r.add_argument("--reports", default=None, help="JSONL report file to render")
    r.add_argument("--weight", default=None, help="weight JSON file for a concentration profile figure")
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
