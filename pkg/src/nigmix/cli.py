"""Batch command-line front end.

Subcommands: ``fit`` (run the mixture sampler on a CSV), ``simulate``
(Monte Carlo risk study for one benchmark law), ``baseball`` and
``prostate`` (real-data pipelines).  All outputs embed the resolved
configuration for provenance; exit codes are 0 on success, 1 on runtime
failure, 2 on usage or data errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import benchmarks, simulate
from .data import DataError, read_csv, read_known_variance_csv
from .dpmm import DensityGridSpec, SamplerConfig, fit as dpmm_fit

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _read_config_file(path: str) -> dict:
    """Flat key=value config file; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; CLI flags "
                   "override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)


def _add_dpmm(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=10, help="truncation level")
    p.add_argument("--gamma", type=float, default=0.1,
                   help="DP concentration")
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--burnin", type=int, default=2000)
    p.add_argument("--mh-step-alpha", type=float, default=0.5)
    p.add_argument("--mh-step-beta", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nigmix",
        description="Compound mean/variance estimation with a "
                    "normal-inverse-gamma mixture prior")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the mixture sampler to a CSV")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--known-variance", action="store_true",
                       help="input is a two-column (value, variance) CSV")
    p_fit.add_argument("--output", required=True, help="JSON summary path")
    p_fit.add_argument("--density-csv", help="optional density-grid CSV path")
    p_fit.add_argument("--density-resolution", type=int, default=100)
    _add_dpmm(p_fit)
    _add_common(p_fit)

    p_sim = sub.add_parser("simulate", help="run a risk study")
    p_sim.add_argument("--example", type=int, required=True,
                       choices=sorted(simulate.EXAMPLES))
    p_sim.add_argument("--q", type=str, default="100",
                       help="comma-separated q values")
    p_sim.add_argument("--reps", type=int, default=200)
    p_sim.add_argument("--estimators", type=str,
                       default="Naive,SURE.M.XKB,SURE.SM.XKB,GL.WMBZ,NIG-DPMM")
    p_sim.add_argument("--output", required=True, help="output stem; writes "
                       "<stem>.csv and <stem>.json")
    p_sim.add_argument("--svg", action="store_true",
                       help="also write <stem>.svg")
    _add_dpmm(p_sim)
    _add_common(p_sim)

    p_bb = sub.add_parser("baseball", help="batting-average benchmark")
    p_bb.add_argument("--input", required=True,
                      help="CSV: player_id,H1,N1,H2,N2,is_pitcher")
    p_bb.add_argument("--subset", default="all",
                      choices=["all", "pitchers", "non-pitchers"])
    p_bb.add_argument("--permutations", type=int, default=0)
    p_bb.add_argument("--estimators", type=str,
                      default="Naive,Grand.Mean,JS.XKB,SURE.M.XKB,"
                              "SURE.SM.XKB,GL.WMBZ,NIG-DPMM")
    p_bb.add_argument("--output", required=True, help="JSON report path")
    _add_dpmm(p_bb)
    _add_common(p_bb)

    p_pr = sub.add_parser("prostate", help="gene-expression benchmark")
    p_pr.add_argument("--input", required=True,
                      help="CSV: genes x subjects matrix with header row")
    p_pr.add_argument("--rows", type=int, default=500)
    p_pr.add_argument("--cols", type=int, default=3)
    p_pr.add_argument("--reps", type=int, default=100)
    p_pr.add_argument("--estimators", type=str,
                      default="Naive,SURE.M.XKB,SURE.SM.XKB,GL.WMBZ,"
                              "NIG-DPMM,NIG-DPMM.K1")
    p_pr.add_argument("--output", required=True, help="JSON report path")
    _add_dpmm(p_pr)
    _add_common(p_pr)
    return parser


def _apply_config_file(args: argparse.Namespace,
                       parser: argparse.ArgumentParser, argv) -> None:
    if not getattr(args, "config", None):
        return
    file_values = _read_config_file(args.config)
    # CLI flags explicitly given override the file; detect via re-parse of
    # defaults-only namespace
    given = {a.lstrip("-").replace("-", "_").split("=")[0]
             for a in argv if a.startswith("--")}
    for key, raw in file_values.items():
        if key in given or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)


def _sampler_config(args, seed: int, density: bool = False) -> SamplerConfig:
    grid = None
    if density:
        grid = DensityGridSpec(resolution=args.density_resolution)
    return SamplerConfig(
        n_iter=args.iterations, n_burnin=args.burnin,
        mh_step_alpha=args.mh_step_alpha, mh_step_beta=args.mh_step_beta,
        density_grid=grid, seed=seed)


def _config_echo(args) -> dict:
    return {key: value for key, value in sorted(vars(args).items())
            if key not in ("command", "config") and value is not None}


def _cmd_fit(args) -> int:
    if args.known_variance:
        data = read_known_variance_csv(args.input)
    else:
        data = read_csv(args.input)
    from .data import standardize, summarize
    from .dpmm import elicit_hyperparams
    std_data, _ = standardize(data)
    hyper = elicit_hyperparams(summarize(std_data), std_data.known_variances,
                               gamma=args.gamma, k=args.k)
    config = _sampler_config(args, args.seed,
                             density=args.density_csv is not None)
    summary = dpmm_fit(data, hyper, config)
    payload = summary.to_json_dict()
    payload["config_echo"] = _config_echo(args)
    with open(args.output, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if args.density_csv:
        summary.save_density_csv(args.density_csv)
    return 0


def _cmd_simulate(args) -> int:
    q_values = [int(x) for x in args.q.split(",") if x]
    estimators = [x.strip() for x in args.estimators.split(",") if x.strip()]
    config = _sampler_config(args, args.seed)
    report = simulate.run_study(
        args.example, q_values, estimators, args.reps, seed=args.seed,
        n_jobs=args.jobs, dpmm_config=config, gamma=args.gamma, k=args.k)
    stem = args.output
    report.save_csv(f"{stem}.csv")
    payload = {"example": args.example, "q_values": q_values,
               "n_reps": args.reps, "seed": args.seed,
               "config_echo": _config_echo(args), "rows": report.to_rows()}
    with open(f"{stem}.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if args.svg:
        report.save_svg(f"{stem}.svg")
    return 0


def _cmd_baseball(args) -> int:
    records = benchmarks.read_baseball_csv(args.input)
    estimators = [x.strip() for x in args.estimators.split(",") if x.strip()]
    config = _sampler_config(args, args.seed)
    payload = {"subset": args.subset, "config_echo": _config_echo(args)}
    payload["tse"] = benchmarks.run_baseball(
        records, estimators, subset=args.subset, seed=args.seed,
        dpmm_config=config)
    if args.permutations > 0:
        payload["permutation_tse"] = benchmarks.baseball_permutations(
            records, estimators, args.permutations, subset=args.subset,
            seed=args.seed, dpmm_config=config)
    with open(args.output, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_prostate(args) -> int:
    matrix = benchmarks.read_prostate_csv(args.input)
    estimators = [x.strip() for x in args.estimators.split(",") if x.strip()]
    config = _sampler_config(args, args.seed)
    result = benchmarks.prostate_study(
        matrix, estimators, n_rows=args.rows, n_cols=args.cols,
        n_reps=args.reps, seed=args.seed, dpmm_config=config)
    payload = {"config_echo": _config_echo(args), "losses": result}
    with open(args.output, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "baseball": _cmd_baseball,
    "prostate": _cmd_prostate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, parser, argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
