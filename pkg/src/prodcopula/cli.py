"""Command-line interface.

Exit codes: 0 success, 2 input/parse error, 3 optimizer non-convergence,
4 invalid copula family or dimension.  JSON outputs embed the run manifest;
CSV outputs get a ``<out>.manifest.json`` sidecar.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, copulas, fitting, ingest, prodfn, sampling
from .copulas import CopulaModel
from .marginals import MarginalTriple

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_FAMILY = 0, 2, 3, 4

CLI_FAMILIES = {
    "frank": "frank",
    "gumbel": "gumbel",
    "clayton": "clayton",
    "sclayton": "sclayton",
    "asym-gumbel": "asym_gumbel",
    "nested-gumbel": "nested_gumbel",
    "gaussian": "gaussian",
    "t3": "t3",
}
BIVARIATE_ONLY = ("asym_gumbel", "gaussian", "t3")

log = logging.getLogger("prodcopula")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- manifests


def _manifest(args, inputs, started):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "command": args.command,
        "inputs": [str(p) for p in inputs if p],
        "seed": args.seed,
        "threads": args.threads,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "tool_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }


def _write_json(path, payload, manifest):
    payload = dict(payload)
    payload["manifest"] = manifest
    Path(path).write_text(json.dumps(payload, indent=2, default=float), encoding="utf-8")


def _write_sidecar(csv_path, manifest):
    Path(f"{csv_path}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from exc


def _load_data(path):
    res = ingest.load_firms(path)
    if res.rejected:
        log.warning("%d of %d rows rejected", len(res.rejected), res.rows_read)
    return res.data


def _load_margins(path) -> MarginalTriple:
    d = _read_json(path)
    try:
        return MarginalTriple.from_dict(d.get("marginals", d))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: not a marginal parameter file ({exc})", EXIT_INPUT) from exc


def _load_model(path) -> CopulaModel:
    d = _read_json(path)
    try:
        return CopulaModel.from_dict(d.get("model", d))
    except copulas.CopulaDomainError as exc:
        raise CliError(str(exc), EXIT_FAMILY) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: not a copula model file ({exc})", EXIT_INPUT) from exc


# ---------------------------------------------------------------- commands


def cmd_fit_marginals(args, started):
    data = _load_data(args.input)
    fits = fitting.fit_marginals(data, trim_top_pct=args.trim_top_pct)
    payload = {
        "marginals": {k: f.params.to_dict() for k, f in fits.items()},
        "loglik": {k: f.loglik for k, f in fits.items()},
        "n_used": {k: f.n for k, f in fits.items()},
        "converged": {k: f.converged for k, f in fits.items()},
        "parameter_count": 4 * len(fits),
    }
    _write_json(args.out, payload, _manifest(args, [args.input], started))
    if not all(f.converged for f in fits.values()):
        raise CliError("marginal fit did not converge", EXIT_NONCONVERGED)


def _pseudo_from_args(args, data):
    if args.margins == "rank":
        pseudo = fitting.make_pseudo(data, "rank")
    elif args.margins.startswith("parametric:"):
        margins = _load_margins(args.margins.split(":", 1)[1])
        pseudo = fitting.make_pseudo(data, "parametric", margins)
    else:
        raise CliError("--margins must be 'rank' or 'parametric:FILE'", EXIT_INPUT)
    if args.pair:
        pair = tuple(v.strip() for v in args.pair.split(","))
        if len(pair) != 2 or any(v not in fitting.VARIABLES for v in pair) or pair[0] == pair[1]:
            raise CliError("--pair must name two distinct variables out of L, K, Y", EXIT_FAMILY)
        pseudo = pseudo.pair(pair)
    return pseudo


def cmd_fit_copula(args, started):
    family = CLI_FAMILIES.get(args.family)
    if family is None:
        raise CliError(f"unknown family {args.family!r}; choose from {sorted(CLI_FAMILIES)}", EXIT_FAMILY)
    if family in BIVARIATE_ONLY and not args.pair:
        raise CliError(f"{args.family} is bivariate; pass --pair", EXIT_FAMILY)
    data = _load_data(args.input)
    pseudo = _pseudo_from_args(args, data)
    try:
        report = fitting.fit_copula(pseudo, family)
    except copulas.CopulaDomainError as exc:
        raise CliError(str(exc), EXIT_FAMILY) from exc
    inputs = [args.input] + ([args.margins.split(":", 1)[1]] if args.margins != "rank" else [])
    _write_json(args.out, report.to_dict(), _manifest(args, inputs, started))
    if not report.converged:
        raise CliError(f"{family} fit did not converge", EXIT_NONCONVERGED)


def cmd_select(args, started):
    reports = []
    for path in args.reports:
        try:
            reports.append(fitting.FitReport.from_dict(_read_json(path)))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"{path}: not a fit report ({exc})", EXIT_INPUT) from exc
    best = fitting.select_model(reports)
    table = [{"report": str(p), "family": r.model.family, "k": r.k, "loglik": r.loglik, "aic": r.aic} for p, r in zip(args.reports, reports)]
    payload = {"selected": best.to_dict(), "candidates": table}
    _write_json(args.out, payload, _manifest(args, args.reports, started))


def cmd_simulate(args, started):
    margins = _load_margins(args.margins)
    model = copulas.independence(3) if args.independence else _load_model(args.model)
    if args.independence and args.sampler == "exact":
        raise CliError("--independence needs the rejection sampler", EXIT_INPUT)
    spec = sampling.SimulationSpec(
        n=args.n, copula=model, marginals=margins, seed=args.seed, sampler=args.sampler, threads=args.threads
    )
    data = sampling.simulate_firms(spec)
    ingest.save_firms(data, args.out, "csv")
    _write_sidecar(args.out, _manifest(args, [args.model, args.margins], started))


def _write_grid(field, path, manifest):
    field.to_csv(path)
    _write_sidecar(path, manifest)


def cmd_analyze(args, started):
    data = _load_data(args.input)
    model = _load_model(args.model) if args.model else None
    inputs = [args.input, args.model, args.margins, args.prodfn]
    manifest = _manifest(args, inputs, started)
    out = Path(args.out)
    grid = np.linspace(0.0, 1.0, args.grid)

    if args.what in ("cumulant-diagonal", "cumulant-sections"):
        source = model if (model is not None and args.source == "model") else fitting.make_pseudo(data)
        if args.what == "cumulant-diagonal":
            _write_grid(analysis.cumulant_diagonal(source, grid), out, manifest)
        else:
            for name, field in analysis.cumulant_sections(source, grid=grid).items():
                _write_grid(field, out.with_name(f"{out.stem}_{name}{out.suffix}"), manifest)
    elif args.what == "empirical-copula":
        pseudo = fitting.make_pseudo(data)
        _write_grid(analysis.empirical_copula(pseudo, grid), out, manifest)
    elif args.what == "ratio-ccdf":
        if model is None or not args.margins:
            raise CliError("ratio-ccdf needs --model and --margins", EXIT_INPUT)
        margins = _load_margins(args.margins)
        fn = prodfn.production_from_dict(_read_json(args.prodfn)) if args.prodfn else prodfn.fit_cd(data)
        ratios = data.value_added / prodfn.production(data.labor, data.capital, fn)
        sides = {"upper": np.linspace(1.0, 3.0, 21), "lower": np.linspace(0.05, 1.0, 20)}
        for side, xs in sides.items():
            cop = prodfn.ratio_ccdf_copula(xs, side, margins, model, fn)
            rnd = prodfn.ratio_ccdf_random(xs, side, margins, fn)
            emp = prodfn.empirical_ratio_ccdf(ratios, xs, side)
            path = out.with_name(f"{out.stem}_{side}{out.suffix}")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("xi,copula,random,empirical\n")
                for row in zip(xs, cop, rnd, emp):
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            _write_sidecar(path, manifest)
    elif args.what == "ratio-hist":
        fn = prodfn.production_from_dict(_read_json(args.prodfn)) if args.prodfn else prodfn.fit_cd(data)
        hist = prodfn.ratio_histogram(data, fn)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("bin_lower,count\n")
            for lo, c in zip(hist.edges[:-1], hist.counts):
                fh.write(f"{lo:.1f},{int(c)}\n")
        manifest = dict(manifest, exceedance=hist.summary_lines())
        _write_sidecar(out, manifest)
        for line in hist.summary_lines():
            print(line)


def cmd_fit_prodfn(args, started):
    data = _load_data(args.input)
    try:
        fn = prodfn.fit_cd(data) if args.form == "cd" else prodfn.fit_ces(data)
    except prodfn.ProductionFitError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    payload = fn.to_dict()
    if args.form == "cd":
        print(f"alpha + beta = {fn.alpha + fn.beta:.4f}")
    else:
        print(f"c = {fn.c:.4f}")
    _write_json(args.out, payload, _manifest(args, [args.input], started))


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prodcopula", description="Production-copula toolkit.")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads; 1 is the reference path")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-marginals", help="fit GB2 marginals for L, K and Y")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trim-top-pct", type=float, default=0.0, help="drop the top P%% of each variable before fitting")
    p.set_defaults(func=cmd_fit_marginals)

    p = sub.add_parser("fit-copula", help="maximum-likelihood copula fit")
    p.add_argument("--input", required=True)
    p.add_argument("--family", required=True, help="|".join(CLI_FAMILIES))
    p.add_argument("--margins", default="rank", help="'rank' or 'parametric:FILE'")
    p.add_argument("--pair", help="fit a bivariate copula to two variables, e.g. K,Y")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_copula)

    p = sub.add_parser("select", help="pick the minimum-AIC fit report")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="simulate a firm ensemble")
    p.add_argument("--model")
    p.add_argument("--margins", required=True)
    p.add_argument("--n", type=int, default=1360)
    p.add_argument("--independence", action="store_true", help="random model without dependence")
    p.add_argument("--sampler", choices=sampling.SAMPLERS, default="rejection")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="emit diagnostic grids and curves as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--model")
    p.add_argument("--margins")
    p.add_argument("--prodfn", help="production function JSON (default: CD fit to the input)")
    p.add_argument(
        "--what",
        required=True,
        choices=("cumulant-diagonal", "cumulant-sections", "empirical-copula", "ratio-ccdf", "ratio-hist"),
    )
    p.add_argument("--source", choices=("model", "empirical"), default="model")
    p.add_argument("--grid", type=int, default=21, help="grid points per axis")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit-prodfn", help="least-squares Cobb-Douglas or CES fit")
    p.add_argument("--input", required=True)
    p.add_argument("--form", choices=("cd", "ces"), default="cd")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_prodfn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "simulate" and not args.independence and not args.model:
        parser.error("simulate needs --model or --independence")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    started = datetime.now(timezone.utc).isoformat()
    try:
        args.func(args, started)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except copulas.CopulaDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAMILY
    except fitting.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ingest.DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
