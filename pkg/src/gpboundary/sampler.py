"""Slice-within-Gibbs posterior sampling of a star-shaped boundary.

The boundary is ``gamma(omega) = Psi(omega) z + mu(omega)`` with ``Psi`` the
orthonormal Fourier basis and ``z_k ~ N(0, v_k(a) / tau)``, ``v_k`` the
squared-exponential periodic kernel eigenvalues.  One iteration updates, in
order: each ``z_k`` by slice sampling, ``tau`` from its Gamma conditional,
the region parameters from their ordered conjugate posterior, and ``a`` by
slice sampling.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import models
from ._fast import FAMILY_CODES, UNIFORMS_PER_UPDATE, partition_stats, slice_coordinate
from .geometry import CORNER_RADIUS, MIN_RADIUS, PolarImage, angle_grid, curve_at
from .models import PriorHyperparams, RegionStats
from .sep_kernel import EIGENVALUE_FLOOR, basis_matrix, eigenvalues

DEFAULT_MEAN = 0.1
GRID_SIZE = 512


class NonFiniteDensityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# slice sampling


@dataclass
class SliceCounter:
    evaluations: int = 0
    step_outs: int = 0
    shrinks: int = 0
    calls: int = 0


def slice_sample_1d(
    log_density: Callable[[float], float],
    x0: float,
    width: float,
    max_step_outs: int,
    rng: np.random.Generator,
    log_f0: float | None = None,
    counter: SliceCounter | None = None,
    return_log_density: bool = False,
):
    """One univariate slice-sampling update with stepping out and shrinkage.

    The interval is grown in steps of ``width`` for at most ``max_step_outs``
    steps in total, then shrunk towards ``x0`` on rejection.
    """
    if log_f0 is None:
        log_f0 = log_density(x0)
    if not math.isfinite(log_f0):
        raise NonFiniteDensityError(f"log density at the starting point is {log_f0}")
    if counter is None:
        counter = SliceCounter()
    counter.calls += 1

    def evaluate(x):
        counter.evaluations += 1
        return log_density(x)

    level = log_f0 + math.log(rng.uniform())
    left = x0 - width * rng.uniform()
    right = left + width
    steps_left = int(math.floor(max_step_outs * rng.uniform()))
    steps_right = max_step_outs - 1 - steps_left
    while steps_left > 0 and evaluate(left) > level:
        left -= width
        steps_left -= 1
        counter.step_outs += 1
    while steps_right > 0 and evaluate(right) > level:
        right += width
        steps_right -= 1
        counter.step_outs += 1

    while True:
        x1 = left + rng.uniform() * (right - left)
        log_f1 = evaluate(x1)
        if log_f1 > level:
            return (x1, log_f1) if return_log_density else x1
        counter.shrinks += 1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-14 * max(1.0, abs(x0)):
            # numerically collapsed onto x0, which lies in the slice
            return (x0, log_f0) if return_log_density else x0


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 5000
    burn_in: int = 1000
    thinning: int = 1
    J: int = 10
    z_width: float = 0.05
    a_width: float = 0.5
    max_step_outs: int = 100
    seed: int | None = None
    prior: PriorHyperparams = field(default_factory=PriorHyperparams)
    mean: float | Callable | None = DEFAULT_MEAN
    gaussian_order: str = "both"
    grid_size: int = GRID_SIZE
    # initial state; None means the defaults z = 0, tau = 500, a = 1, noise = MLE
    initial_z: tuple | None = None
    initial_tau: float = 500.0
    initial_a: float = 1.0
    initial_noise: object = None
    # blocks can be frozen for testing conditional updates
    update_curve: bool = True
    update_tau: bool = True
    update_noise: bool = True
    update_scale: bool = True
    # random-series alternative
    series_sd: float = 0.2
    rw_step: float = 0.02
    adapt_every: int = 50

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not (self.z_width > 0 and self.a_width > 0):
            raise ValueError("slice widths must be positive")
        if self.J < 1:
            raise ValueError("J must be >= 1")

    @property
    def L(self) -> int:
        return 2 * self.J + 1

    @property
    def n_draws(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thinning))


@dataclass(frozen=True)
class PosteriorDraws:
    grid: np.ndarray
    curves: np.ndarray  # (draws, grid)
    scalars: dict  # name -> (draws,) array
    diagnostics: dict
    coefficients: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.curves.shape[0]

    def write_csv(self, directory, prefix: str = "") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / f"{prefix}draws.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{v:.10f}" for v in self.grid])
            for row in self.curves:
                w.writerow([repr(float(v)) for v in row])
        names = list(self.scalars)
        with open(directory / f"{prefix}scalars.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for i in range(self.n_draws):
                w.writerow([repr(float(self.scalars[k][i])) for k in names])


@dataclass(frozen=True)
class CredibleBand:
    grid: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    multiplier: float
    level: float
    scale_floored: int = 0

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.multiplier * self.scale

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.multiplier * self.scale

    def contains(self, curve) -> bool:
        values = curve_at(curve, self.grid)
        return bool(np.all((values >= self.lower) & (values <= self.upper)))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "center", "scale", "lower", "upper"])
            for row in zip(self.grid, self.center, self.scale, self.lower, self.upper):
                w.writerow([repr(float(v)) for v in row])


def posterior_mean_curve(draws: PosteriorDraws) -> np.ndarray:
    if draws.n_draws < 2:
        raise ValueError("need at least two draws")
    return draws.curves.mean(axis=0)


def uniform_credible_band(draws, level: float = 0.95, scale_floor: float = 1e-8) -> CredibleBand:
    """Variable-width band ``center +- L0 * scale`` holding whole curves.

    ``L0`` is the ``ceil(level * draws)``-th smallest sup-norm standardized
    deviation, so that fraction of the draws lie entirely inside the band.
    """
    curves = draws.curves if isinstance(draws, PosteriorDraws) else np.asarray(draws)
    grid = draws.grid if isinstance(draws, PosteriorDraws) else angle_grid(curves.shape[1])
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    center = curves.mean(axis=0)
    scale = curves.std(axis=0, ddof=1) if curves.shape[0] > 1 else np.zeros_like(center)
    floored = int(np.count_nonzero(scale < scale_floor))
    scale = np.maximum(scale, scale_floor)
    u = np.max(np.abs(curves - center) / scale, axis=1)
    rank = max(1, math.ceil(level * len(u) - 1e-9))
    multiplier = float(np.sort(u)[rank - 1])
    return CredibleBand(grid, center, scale, multiplier, level, floored)


# ---------------------------------------------------------------------------
# the chain


def _mean_values(mean, omegas) -> np.ndarray:
    if mean is None:
        mean = DEFAULT_MEAN
    return curve_at(mean, omegas)


def _log_eigen(a: float, J: int):
    v = np.maximum(eigenvalues(a, J), EIGENVALUE_FLOOR)
    return v, np.log(v)


class _Likelihood:
    """Region statistics of perturbed curves, evaluated in O(n)."""

    def __init__(self, image: PolarImage):
        self.r = np.ascontiguousarray(image.r, dtype=float)
        self.y = np.ascontiguousarray(image.y, dtype=float)
        self.n = self.r.size
        self.total = float(self.y.sum())
        self.total_sq = float(self.y @ self.y)
        self.zero = np.zeros(self.n)
        self.evaluations = 0
        self.clamped = 0

    def stats(self, base, column=None, delta=0.0) -> tuple[RegionStats, int]:
        if column is None:
            column, delta = self.zero, 0.0
        n_in, s_in, q_in, clamped = partition_stats(
            self.r, self.y, base, column, delta, MIN_RADIUS, CORNER_RADIUS
        )
        self.evaluations += self.n
        self.clamped += clamped
        stats = RegionStats(
            n_in, self.n - n_in, s_in, self.total - s_in, q_in, self.total_sq - q_in
        )
        return stats, clamped


def _noise_values(noise) -> dict:
    return {k: float(v) for k, v in noise.params().items()}


def _initial_noise(family, config, lik, gamma):
    if config.initial_noise is not None:
        return config.initial_noise
    stats, _ = lik.stats(gamma)
    return models.mle_from_stats(family, stats, order=config.gaussian_order)


class ChainSetup:
    def __init__(self, image: PolarImage, family: str, config: SamplerConfig):
        self.family = models.check_family(family)
        self.config = config
        self.lik = _Likelihood(image)
        self.psi = np.ascontiguousarray(basis_matrix(image.omega, config.L))
        self.psi_cols = [np.ascontiguousarray(self.psi[:, k]) for k in range(config.L)]
        self.mu = _mean_values(config.mean, image.omega)
        self.grid = angle_grid(config.grid_size)
        self.psi_grid = basis_matrix(self.grid, config.L)
        self.mu_grid = _mean_values(config.mean, self.grid)
        self.image_mean = float(np.mean(image.y))

    def curve(self, z):
        return self.psi @ z + self.mu

    def grid_curve(self, z):
        return np.clip(self.psi_grid @ z + self.mu_grid, MIN_RADIUS, CORNER_RADIUS)

    def loglik(self, noise, stats: RegionStats) -> float:
        if stats.n_in == 0 or stats.n_out == 0:
            return -math.inf
        return noise.loglik(stats)


def _record(scalars: dict, name: str, value: float):
    scalars.setdefault(name, []).append(value)


def run_chain(image: PolarImage, family: str, config: SamplerConfig, rng=None) -> PosteriorDraws:
    """Slice-within-Gibbs sampler over ``(z, tau, region parameters, a)``."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    setup = ChainSetup(image, family, config)
    prior = config.prior
    L, J = config.L, config.J
    lik = setup.lik

    z = np.zeros(L) if config.initial_z is None else np.array(config.initial_z, dtype=float)
    tau, a = float(config.initial_tau), float(config.initial_a)
    gamma = setup.curve(z)
    noise = _initial_noise(setup.family, config, lik, gamma)
    init_stats, _ = lik.stats(gamma)
    if init_stats.n_in == 0 or init_stats.n_out == 0:
        raise models.EmptyRegionError("initial curve leaves a region empty")
    v, log_v = _log_eigen(a, J)

    code = FAMILY_CODES[setup.family]
    z_counts = np.zeros(3, dtype=np.int64)  # evaluations, step-outs, shrinks
    a_counter = SliceCounter()
    rejected_noise = 0
    curves, coefs, scalars, trace = [], [], {}, []
    clamp_after, evals_after = 0, 0
    t0 = time.perf_counter()

    for it in range(config.iterations):
        if it == config.burn_in:
            clamp_after, evals_after = lik.clamped, lik.evaluations

        # Step 2: coordinate-wise slice updates of z
        if config.update_curve:
            theta = pack_theta(noise)
            ll = setup.loglik(noise, lik.stats(gamma)[0])
            for k in range(L):
                z[k], ll = slice_coordinate(
                    lik.r, lik.y, gamma, setup.psi_cols[k], z[k], ll, tau / v[k], code, theta,
                    lik.total, lik.total_sq, config.z_width, config.max_step_outs,
                    MIN_RADIUS, CORNER_RADIUS, rng.random(UNIFORMS_PER_UPDATE), z_counts,
                )
            # refresh to shed accumulated round-off from the in-place updates
            gamma = setup.curve(z)

        quad = float(np.sum(z * z / v))

        # Step 3: tau | z, a
        if config.update_tau:
            tau = rng.gamma(prior.tau_shape + 0.5 * L, 1.0 / (prior.tau_rate + 0.5 * quad))

        # Step 4: region parameters | z
        stats, _ = lik.stats(gamma)
        if config.update_noise:
            try:
                noise = models.sample_ordered_posterior(
                    setup.family, prior, stats, rng, current=noise, image_mean=setup.image_mean
                )
            except models.DegeneratePosteriorError:
                rejected_noise += 1

        # Step 5: a | z, tau
        if config.update_scale:
            zz = z * z

            def log_density_a(x):
                if x <= 0:
                    return -math.inf
                vx, log_vx = _log_eigen(x, J)
                return (
                    -0.5 * log_vx.sum()
                    - 0.5 * tau * float(np.sum(zz / vx))
                    + (prior.a_shape - 1.0) * math.log(x)
                    - prior.a_rate * x
                )

            a = slice_sample_1d(log_density_a, a, config.a_width, config.max_step_outs, rng, counter=a_counter)
            v, log_v = _log_eigen(a, J)
            quad = float(np.sum(z * z / v))

        logpost = (
            setup.loglik(noise, stats)
            - 0.5 * log_v.sum()
            + 0.5 * L * math.log(tau)
            - 0.5 * tau * quad
            + (prior.tau_shape - 1.0) * math.log(tau)
            - prior.tau_rate * tau
            + (prior.a_shape - 1.0) * math.log(a)
            - prior.a_rate * a
        )
        trace.append(logpost)

        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            curves.append(setup.grid_curve(z))
            coefs.append(z.copy())
            _record(scalars, "a", a)
            _record(scalars, "tau", tau)
            for name, value in _noise_values(noise).items():
                _record(scalars, name, value)
            _record(scalars, "log_posterior", logpost)

    diagnostics = {
        "method": "slice_gibbs",
        "family": setup.family,
        "z_slice_evaluations": int(z_counts[0]),
        "z_step_outs": int(z_counts[1]),
        "z_shrinks": int(z_counts[2]),
        "a_slice_evaluations": a_counter.evaluations,
        "a_step_outs": a_counter.step_outs,
        "noise_updates_rejected": rejected_noise,
        "clamp_fraction_after_burn_in": _ratio(lik.clamped - clamp_after, lik.evaluations - evals_after),
        "clamp_fraction": _ratio(lik.clamped, lik.evaluations),
        "log_posterior_trace": np.array(trace),
        "seconds": time.perf_counter() - t0,
    }
    return PosteriorDraws(
        grid=setup.grid,
        curves=np.array(curves),
        scalars={k: np.array(v) for k, v in scalars.items()},
        diagnostics=diagnostics,
        coefficients=np.array(coefs),
    )


def pack_theta(noise) -> np.ndarray:
    """Region parameters in the layout the compiled log-likelihood expects."""
    inside, outside = noise.region_params()
    if noise.family == "gaussian":
        return np.array([inside[0], inside[1], outside[0], outside[1]])
    return np.array([inside[0], outside[0], 0.0, 0.0])


def _ratio(a, b):
    return float(a) / b if b else 0.0


def run_random_series_chain(
    image: PolarImage, family: str, J: int, config: SamplerConfig, rng=None
) -> PosteriorDraws:
    """Fixed-order trigonometric series prior with random-walk Metropolis coefficients.

    Coefficients are independent ``N(0, series_sd^2)``; each is updated by a
    Gaussian random-walk proposal whose step is tuned during burn-in towards
    an acceptance rate in ``[0.25, 0.45]``.  Region parameters are updated as
    in :func:`run_chain`.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    config = replace(config, J=J)
    setup = ChainSetup(image, family, config)
    prior = config.prior
    L = config.L
    lik = setup.lik
    var = config.series_sd**2

    z = np.zeros(L) if config.initial_z is None else np.array(config.initial_z, dtype=float)
    gamma = setup.curve(z)
    noise = _initial_noise(setup.family, config, lik, gamma)
    stats, _ = lik.stats(gamma)
    if stats.n_in == 0 or stats.n_out == 0:
        raise models.EmptyRegionError("initial curve leaves a region empty")
    current_ll = setup.loglik(noise, stats)

    steps = np.full(L, config.rw_step)
    window_accept = np.zeros(L)
    accepted_after = np.zeros(L)
    proposed_after = 0
    rejected_noise = 0
    curves, coefs, scalars, trace = [], [], {}, []
    clamp_after, evals_after = 0, 0
    t0 = time.perf_counter()

    for it in range(config.iterations):
        if it == config.burn_in:
            clamp_after, evals_after = lik.clamped, lik.evaluations
        if config.update_curve:
            for k in range(L):
                col = setup.psi_cols[k]
                proposal = z[k] + steps[k] * rng.standard_normal()
                prop_stats, _ = lik.stats(gamma, col, proposal - z[k])
                prop_ll = setup.loglik(noise, prop_stats)
                log_ratio = prop_ll - current_ll - 0.5 * (proposal**2 - z[k] ** 2) / var
                if math.log(rng.uniform()) < log_ratio:
                    gamma = gamma + (proposal - z[k]) * col
                    z[k] = proposal
                    current_ll = prop_ll
                    window_accept[k] += 1
                    if it >= config.burn_in:
                        accepted_after[k] += 1
            gamma = setup.curve(z)
            if it >= config.burn_in:
                proposed_after += 1
            elif (it + 1) % config.adapt_every == 0:
                rate = window_accept / config.adapt_every
                steps = np.where(rate < 0.25, steps * 0.8, np.where(rate > 0.45, steps * 1.25, steps))
                window_accept[:] = 0

        stats, _ = lik.stats(gamma)
        if config.update_noise:
            try:
                noise = models.sample_ordered_posterior(
                    setup.family, prior, stats, rng, current=noise, image_mean=setup.image_mean
                )
            except models.DegeneratePosteriorError:
                rejected_noise += 1
        current_ll = setup.loglik(noise, stats)
        trace.append(current_ll - 0.5 * float(z @ z) / var)

        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            curves.append(setup.grid_curve(z))
            coefs.append(z.copy())
            for name, value in _noise_values(noise).items():
                _record(scalars, name, value)
            _record(scalars, "log_posterior", trace[-1])

    diagnostics = {
        "method": "random_series",
        "family": setup.family,
        "acceptance_rate": accepted_after / max(proposed_after, 1),
        "final_steps": steps,
        "noise_updates_rejected": rejected_noise,
        "clamp_fraction_after_burn_in": _ratio(lik.clamped - clamp_after, lik.evaluations - evals_after),
        "clamp_fraction": _ratio(lik.clamped, lik.evaluations),
        "log_posterior_trace": np.array(trace),
        "seconds": time.perf_counter() - t0,
    }
    return PosteriorDraws(
        grid=setup.grid,
        curves=np.array(curves),
        scalars={k: np.array(v) for k, v in scalars.items()},
        diagnostics=diagnostics,
        coefficients=np.array(coefs),
    )


def summary_record(draws: PosteriorDraws, band: CredibleBand) -> dict:
    """JSON-serialisable summary of a run."""
    out = {
        "draws": draws.n_draws,
        "band_level": band.level,
        "band_multiplier": band.multiplier,
        "band_scale_floored": band.scale_floored,
        "posterior_means": {k: float(np.mean(v)) for k, v in draws.scalars.items()},
    }
    for key, value in draws.diagnostics.items():
        if isinstance(value, np.ndarray):
            if key == "log_posterior_trace":
                continue
            value = value.tolist()
        out[key] = value
    return out


def write_summary(record: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
