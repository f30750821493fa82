"""Replicated simulation studies: simulate, fit, compare, aggregate.

Every replication owns two seeds spawned from the master seed, one for the
image and one for the chain, so a study is reproducible from a single
integer and replication ``i`` does not depend on how many others run.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..geometry import case_shape, interpolate_periodic, lebesgue_error
from ..sampler import SamplerConfig, posterior_mean_curve, run_chain, uniform_credible_band
from . import baselines as bl
from .cases import CASES, GAUSSIAN_FIT_ORDER, noise_family, simulate_case
from .figures import render_figure

BAYES = "bayes"
DEFAULT_BASELINES = ("mce5", "mce31", "cp5", "cp31")
FULL_REPLICATIONS = 100

# 5000 retained iterations after 1000 burn-in
STUDY_SAMPLER_DEFAULTS = {"iterations": 6000, "burn_in": 1000}
# SamplerConfig fields a study config may override
_SAMPLER_KEYS = {"iterations", "burn_in", "thinning", "J", "z_width", "a_width", "max_step_outs", "grid_size"}


class StudyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    """One simulation case run for a number of replications.

    ``prior_mean`` is ``"auto"`` (constant 0.1 for binary cases, the CP5
    estimate for Gaussian cases), ``"constant"``, ``"cp5"`` or a number.
    ``baselines`` names methods as ``<mce|cp><n_basis>``.
    """

    case: str
    m: int = 100
    noise: dict = field(default_factory=dict)
    replications: int = 10
    master_seed: int = 0
    sampler: dict = field(default_factory=dict)
    prior_mean: object = "auto"
    gaussian_order: str | None = None
    baselines: tuple = DEFAULT_BASELINES
    n_angles: int = bl.DEFAULT_ANGLES
    band_halfwidth: float = bl.DEFAULT_HALFWIDTH
    ridge_penalty: float = bl.DEFAULT_PENALTY
    band_level: float = 0.95
    figures: int = 1
    n_jobs: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "case", self.case.upper())
        object.__setattr__(self, "baselines", tuple(self.baselines))
        if self.case not in CASES:
            raise StudyConfigError(f"unknown case {self.case!r}")
        if self.replications < 1:
            raise StudyConfigError("replications must be >= 1")
        unknown = set(self.sampler) - _SAMPLER_KEYS
        if unknown:
            raise StudyConfigError(f"unsupported sampler settings: {sorted(unknown)}")
        for name in self.baselines:
            _parse_baseline(name)
        if not (isinstance(self.prior_mean, (int, float)) or self.prior_mean in ("auto", "constant", "cp5")):
            raise StudyConfigError(f"bad prior_mean {self.prior_mean!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise StudyConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "StudyConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["baselines"] = list(self.baselines)
        return out

    @property
    def family(self) -> str:
        return noise_family(self.case)

    def sampler_config(self, seed: int, mean) -> SamplerConfig:
        order = self.gaussian_order or GAUSSIAN_FIT_ORDER.get(self.case, "both")
        settings = {**STUDY_SAMPLER_DEFAULTS, **self.sampler}
        return SamplerConfig(seed=seed, mean=mean, gaussian_order=order, **settings)

    def replication_seeds(self) -> list[tuple[int, int]]:
        """``(image_seed, chain_seed)`` per replication."""
        out = []
        for child in np.random.SeedSequence(self.master_seed).spawn(self.replications):
            image, chain = child.spawn(2)
            out.append((int(image.generate_state(1)[0]), int(chain.generate_state(1)[0])))
        return out


def _parse_baseline(name: str) -> tuple[str, int]:
    for method in bl.BASELINES:
        if name.startswith(method) and name[len(method):].isdigit():
            return method, int(name[len(method):])
    raise StudyConfigError(f"bad baseline name {name!r}; expected e.g. mce5 or cp31")


def _fit_baseline(config: StudyConfig, name: str, image):
    method, n_basis = _parse_baseline(name)
    kwargs = dict(
        n_angles=config.n_angles, band_halfwidth=config.band_halfwidth, penalty=config.ridge_penalty
    )
    return bl.run_baseline(method, image, n_basis=n_basis, **kwargs)


def _prior_mean(config: StudyConfig, image, fits: dict):
    choice = config.prior_mean
    if choice == "auto":
        choice = "cp5" if config.family == "gaussian" else "constant"
    if choice == "constant":
        return None
    if choice == "cp5":
        return fits["cp5"] if "cp5" in fits else _fit_baseline(config, "cp5", image)
    return float(choice)


def run_replication(config: StudyConfig, index: int, seeds: tuple[int, int], figure_path=None) -> dict:
    """Simulate one image and score every method on it; failures are recorded, not raised."""
    image_seed, chain_seed = seeds
    record = {
        "replication": index,
        "image_seed": image_seed,
        "chain_seed": chain_seed,
        "status": "ok",
        "errors": {},
        "runtimes": {},
        "band_covers": None,
        "diagnostics": {},
    }
    truth = case_shape(config.case)
    try:
        image = simulate_case(config.case, config.m, config.noise, seed=image_seed)
        fits = {}
        for name in config.baselines:
            t0 = time.perf_counter()
            fits[name] = _fit_baseline(config, name, image)
            record["runtimes"][name] = time.perf_counter() - t0
            record["errors"][name] = lebesgue_error(fits[name], truth)

        t0 = time.perf_counter()
        mean = _prior_mean(config, image, fits)
        sampler_config = config.sampler_config(chain_seed, mean)
        draws = run_chain(image, config.family, sampler_config)
        estimate = posterior_mean_curve(draws)
        band = uniform_credible_band(draws, config.band_level)
        record["runtimes"][BAYES] = time.perf_counter() - t0
        record["errors"][BAYES] = lebesgue_error(interpolate_periodic(estimate, draws.grid), truth)
        record["band_covers"] = band.contains(truth)
        d = draws.diagnostics
        record["diagnostics"] = {
            "clamp_fraction_after_burn_in": d["clamp_fraction_after_burn_in"],
            "z_evaluations_per_iteration": d["z_slice_evaluations"] / sampler_config.iterations,
            "noise_updates_rejected": d["noise_updates_rejected"],
            "band_multiplier": band.multiplier,
        }
        if figure_path is not None:
            render_figure(image, truth, estimate, band, figure_path, grid=draws.grid)
    except Exception as exc:  # noqa: BLE001 - a failed replication is data
        record["status"] = f"failed: {type(exc).__name__}: {exc}"
    return record


def _replication_job(args):
    return run_replication(*args)


@dataclass
class StudyReport:
    config: StudyConfig
    records: list

    @property
    def methods(self) -> list[str]:
        return [BAYES, *self.config.baselines]

    def errors(self, method: str) -> np.ndarray:
        return np.array([r["errors"][method] for r in self.records if method in r["errors"]])

    def summary(self) -> dict:
        """Per method: mean error, standard error (sd / sqrt(reps)) and count."""
        out = {}
        for method in self.methods:
            e = self.errors(method)
            n = len(e)
            mean = float(e.mean()) if n else math.nan
            se = float(e.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            out[method] = {"mean": mean, "se": se, "n": n}
        return out

    @property
    def coverage(self) -> float:
        flags = [r["band_covers"] for r in self.records if r["band_covers"] is not None]
        return float(np.mean(flags)) if flags else math.nan

    @property
    def failures(self) -> list:
        return [r for r in self.records if r["status"] != "ok"]

    def write(self, directory) -> None:
        """``replications.csv``, ``summary.csv`` and ``config.json`` are deterministic;
        wall-clock times go to ``runtimes.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        methods = self.methods
        diag_keys = sorted({k for r in self.records for k in r["diagnostics"]})
        with open(directory / "replications.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "image_seed", "chain_seed", "status", *methods, "band_covers", *diag_keys])
            for r in self.records:
                errs = [_fmt(r["errors"].get(m, math.nan)) for m in methods]
                covers = "" if r["band_covers"] is None else int(r["band_covers"])
                diags = [_fmt(r["diagnostics"].get(k, math.nan)) for k in diag_keys]
                w.writerow([r["replication"], r["image_seed"], r["chain_seed"], r["status"], *errs, covers, *diags])
        with open(directory / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "method", "mean_error", "se", "n", "band_coverage"])
            for method, s in self.summary().items():
                cov = _fmt(self.coverage) if method == BAYES else ""
                w.writerow([self.config.case, method, _fmt(s["mean"]), _fmt(s["se"]), s["n"], cov])
        with open(directory / "config.json", "w") as fh:
            json.dump(self.config.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(directory / "runtimes.json", "w") as fh:
            json.dump([{"replication": r["replication"], **r["runtimes"]} for r in self.records], fh, indent=2)
            fh.write("\n")


def _fmt(value) -> str:
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def run_study(config: StudyConfig, output_dir=None) -> StudyReport:
    """Run all replications (in worker processes when ``n_jobs > 1``) and write the report."""
    output_dir = output_dir or config.output_dir
    seeds = config.replication_seeds()
    jobs = []
    for i, s in enumerate(seeds):
        fig = None
        if output_dir is not None and i < config.figures:
            fig = Path(output_dir) / "figures" / f"{config.case.lower()}_rep{i}.svg"
        jobs.append((config, i, s, fig))
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            records = list(pool.map(_replication_job, jobs))
    else:
        records = [_replication_job(job) for job in jobs]
    report = StudyReport(config, records)
    if output_dir is not None:
        report.write(output_dir)
    return report


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_report(rows: list[dict]) -> str:
    """Table of mean errors and standard errors in units of 1e-2."""
    lines = [f"{'case':<6}{'method':<8}{'error x1e-2':>12}{'(se)':>9}{'n':>5}{'coverage':>10}"]
    for row in rows:
        mean = float(row["mean_error"]) * 100
        se = float(row["se"]) * 100
        cov = row.get("band_coverage") or ""
        cov = f"{float(cov):.2f}" if cov and cov != "nan" else ""
        lines.append(f"{row['case']:<6}{row['method']:<8}{mean:>12.2f}{f'({se:.2f})':>9}{row['n']:>5}{cov:>10}")
    return "\n".join(lines)
