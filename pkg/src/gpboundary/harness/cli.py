"""Command-line interface: simulate, detect, baseline, study, report.

On failure a single JSON error record is written to stderr and the exit
status is nonzero (2 for bad arguments, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from ..geometry import read_image, write_image
from ..models import FAMILIES, GAUSSIAN_ORDERS
from ..sampler import (
    SamplerConfig,
    run_chain,
    summary_record,
    uniform_credible_band,
    write_summary,
)
from . import baselines as bl
from .cases import CASES, simulate_case
from .study import FULL_REPLICATIONS, StudyConfig, format_report, read_summary, run_study


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", "ArgumentError", message)
        sys.exit(2)


def _emit_error(command, kind, message):
    record = {"status": "error", "command": command, "error": kind, "message": message}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _cmd_simulate(args):
    noise = {}
    if args.case.upper().startswith("B"):
        if args.p_in is not None:
            noise["p_in"] = args.p_in
        if args.p_out is not None:
            noise["p_out"] = args.p_out
    else:
        if args.sigma_in is not None:
            noise["sigma_in"] = args.sigma_in
        if args.sigma_out is not None:
            noise["sigma_out"] = args.sigma_out
    image = simulate_case(args.case, args.m, noise, seed=args.seed)
    write_image(image, args.out)
    return {"out": str(args.out), "pixels": image.n}


def _prior_mean(value: str, image):
    if value == "cp5":
        return bl.cp_baseline(image, n_basis=5)
    try:
        return float(value)
    except ValueError:
        raise CliError(f"--prior-mean must be a number or 'cp5', got {value!r}") from None


def _cmd_detect(args):
    image = read_image(args.input)
    config = SamplerConfig(
        iterations=args.iters + args.burnin,
        burn_in=args.burnin,
        thinning=args.thin,
        J=args.j,
        seed=args.seed,
        gaussian_order=args.order,
        mean=_prior_mean(args.prior_mean, image),
    )
    draws = run_chain(image, args.noise, config)
    band = uniform_credible_band(draws, args.level)
    out = Path(args.out_dir)
    draws.write_csv(out)
    band.write_csv(out / "band.csv")
    record = summary_record(draws, band)
    record["input"] = str(args.input)
    write_summary(record, out / "summary.json")
    return {"out_dir": str(out), "draws": draws.n_draws, "band_multiplier": band.multiplier}


def _cmd_baseline(args):
    image = read_image(args.input)
    kwargs = dict(n_angles=args.n_angles, band_halfwidth=args.halfwidth, penalty=args.penalty)
    if args.method == "cp" and args.family:
        kwargs["family"] = args.family
    fit = bl.run_baseline(args.method, image, n_basis=args.n_basis, **kwargs)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "raw", "flagged", "radius"])
        for row in zip(fit.angles, fit.raw, fit.flagged, fit(fit.angles)):
            w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2]), repr(float(row[3]))])
    return {"out": str(path), "flagged": int(fit.flagged.sum())}


def _cmd_study(args):
    config = StudyConfig.from_file(args.config)
    if args.full:
        config = replace(config, replications=FULL_REPLICATIONS)
    if args.jobs is not None:
        config = replace(config, n_jobs=args.jobs)
    report = run_study(config, args.out_dir)
    summary = report.summary()
    return {
        "out_dir": str(args.out_dir),
        "failures": len(report.failures),
        "mean_errors": {k: v["mean"] for k, v in summary.items()},
    }


def _cmd_report(args):
    paths = sorted(Path(args.dir).rglob("summary.csv"))
    if not paths:
        raise CliError(f"no summary.csv under {args.dir}")
    rows = [row for p in paths for row in read_summary(p)]
    print(format_report(rows))
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpboundary", description="Boundary detection with a periodic Gaussian-process prior.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a case image")
    p.add_argument("--case", required=True, type=str.upper, choices=CASES)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--p-in", type=float)
    p.add_argument("--p-out", type=float)
    p.add_argument("--sigma-in", type=float)
    p.add_argument("--sigma-out", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="run the posterior sampler on an image")
    p.add_argument("--input", required=True)
    p.add_argument("--noise", required=True, choices=FAMILIES)
    p.add_argument("--iters", type=int, default=5000, help="retained iterations after burn-in")
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--j", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", choices=GAUSSIAN_ORDERS, default="both")
    p.add_argument("--prior-mean", default="0.1", help="constant radius or 'cp5'")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("baseline", help="fit the MCE or change-point baseline")
    p.add_argument("--method", required=True, choices=sorted(bl.BASELINES))
    p.add_argument("--n-basis", type=int, default=5)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-angles", type=int, default=bl.DEFAULT_ANGLES)
    p.add_argument("--halfwidth", type=float, default=bl.DEFAULT_HALFWIDTH)
    p.add_argument("--penalty", type=float, default=bl.DEFAULT_PENALTY)
    p.add_argument("--family", choices=("bernoulli", "gaussian"))
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("study", help="run a replicated simulation study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--full", action="store_true", help=f"run {FULL_REPLICATIONS} replications")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("report", help="print the summary tables found under a directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as a structured record
        _emit_error(args.command, type(exc).__name__, str(exc))
        return 1
    if result is not None:
        print(json.dumps({"status": "ok", "command": args.command, **result}, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
