"""Noise families, ordered conjugate updates and separation diagnostics.

Each family describes the intensity distribution inside and outside the
boundary.  The inside parameter is kept at least as large as the outside one
(for the Gaussian family the constrained coordinates are configurable), which
keeps the two regions identifiable.  Posterior draws satisfy the order
strictly; ties are accepted on construction so that a no-signal model can be
written down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

FAMILIES = ("bernoulli", "gaussian", "poisson", "exponential")
GAUSSIAN_ORDERS = ("both", "mean", "variance")

_MIN_RATE = 1e-8


class InvalidParameterError(ValueError):
    pass


class DegeneratePosteriorError(ValueError):
    """A conjugate posterior is improper, typically because a region is empty."""


class EmptyRegionError(ValueError):
    pass


@dataclass(frozen=True)
class RegionStats:
    """Sufficient statistics of a two-region partition of an image."""

    n_in: int
    n_out: int
    sum_in: float
    sum_out: float
    sumsq_in: float = 0.0
    sumsq_out: float = 0.0

    @classmethod
    def from_partition(cls, y, inside) -> "RegionStats":
        y = np.asarray(y, dtype=float)
        inside = np.asarray(inside, dtype=bool)
        y_in, y_out = y[inside], y[~inside]
        return cls(
            n_in=int(y_in.size),
            n_out=int(y_out.size),
            sum_in=float(y_in.sum()),
            sum_out=float(y_out.sum()),
            sumsq_in=float(y_in @ y_in),
            sumsq_out=float(y_out @ y_out),
        )

    @property
    def n(self) -> int:
        return self.n_in + self.n_out


@dataclass(frozen=True)
class PriorHyperparams:
    beta_a: float = 0.0
    beta_b: float = 0.0
    normal_mean: float | None = None  # None: use the image mean
    normal_sd: float = 1e3
    precision_shape: float = 1e-2
    precision_rate: float = 1e-2
    poisson_shape: float = 1e-2
    poisson_rate: float = 1e-2
    exponential_shape: float = 1e-2
    exponential_rate: float = 1e-2
    tau_shape: float = 500.0
    tau_rate: float = 1.0
    a_shape: float = 2.0
    a_rate: float = 1.0

    def __post_init__(self):
        if self.beta_a < 0 or self.beta_b < 0:
            raise InvalidParameterError("beta hyperparameters must be >= 0")
        positive = (
            "normal_sd precision_shape precision_rate poisson_shape poisson_rate "
            "exponential_shape exponential_rate tau_shape tau_rate a_shape a_rate"
        ).split()
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# noise families


@dataclass(frozen=True)
class Bernoulli:
    p_in: float
    p_out: float

    family = "bernoulli"

    def __post_init__(self):
        if not 0.0 < self.p_out <= self.p_in < 1.0:
            raise InvalidParameterError(f"need 0 < p_out <= p_in < 1, got {self.p_in}, {self.p_out}")

    def loglik(self, s: RegionStats) -> float:
        return (
            s.sum_in * math.log(self.p_in)
            + (s.n_in - s.sum_in) * math.log1p(-self.p_in)
            + s.sum_out * math.log(self.p_out)
            + (s.n_out - s.sum_out) * math.log1p(-self.p_out)
        )

    def params(self) -> dict:
        return {"p_in": self.p_in, "p_out": self.p_out}

    def region_params(self):
        return (self.p_in,), (self.p_out,)


@dataclass(frozen=True)
class Gaussian:
    mu_in: float
    sigma_in: float
    mu_out: float
    sigma_out: float
    order: str = "both"

    family = "gaussian"

    def __post_init__(self):
        if self.order not in GAUSSIAN_ORDERS:
            raise InvalidParameterError(f"order must be one of {GAUSSIAN_ORDERS}")
        if not (self.sigma_in > 0 and self.sigma_out > 0):
            raise InvalidParameterError("standard deviations must be positive")
        if self.order in ("both", "mean") and not self.mu_in >= self.mu_out:
            raise InvalidParameterError(f"need mu_in >= mu_out, got {self.mu_in}, {self.mu_out}")
        if self.order in ("both", "variance") and not self.sigma_in >= self.sigma_out:
            raise InvalidParameterError(
                f"need sigma_in >= sigma_out, got {self.sigma_in}, {self.sigma_out}"
            )

    def loglik(self, s: RegionStats) -> float:
        # -0.5 n log(2 pi) is partition independent and dropped.
        rss_in = s.sumsq_in - 2.0 * self.mu_in * s.sum_in + s.n_in * self.mu_in**2
        rss_out = s.sumsq_out - 2.0 * self.mu_out * s.sum_out + s.n_out * self.mu_out**2
        return (
            -s.n_in * math.log(self.sigma_in)
            - s.n_out * math.log(self.sigma_out)
            - 0.5 * rss_in / self.sigma_in**2
            - 0.5 * rss_out / self.sigma_out**2
        )

    def params(self) -> dict:
        return {
            "mu_in": self.mu_in,
            "sigma_in": self.sigma_in,
            "mu_out": self.mu_out,
            "sigma_out": self.sigma_out,
        }

    def region_params(self):
        return (self.mu_in, self.sigma_in), (self.mu_out, self.sigma_out)


@dataclass(frozen=True)
class Poisson:
    rate_in: float
    rate_out: float

    family = "poisson"

    def __post_init__(self):
        if not 0.0 < self.rate_out <= self.rate_in:
            raise InvalidParameterError(f"need 0 < rate_out <= rate_in, got {self.rate_in}, {self.rate_out}")

    def loglik(self, s: RegionStats) -> float:
        # -sum log(y!) is partition independent and dropped.
        return (
            s.sum_in * math.log(self.rate_in)
            - s.n_in * self.rate_in
            + s.sum_out * math.log(self.rate_out)
            - s.n_out * self.rate_out
        )

    def params(self) -> dict:
        return {"rate_in": self.rate_in, "rate_out": self.rate_out}

    def region_params(self):
        return (self.rate_in,), (self.rate_out,)


@dataclass(frozen=True)
class Exponential:
    rate_in: float
    rate_out: float

    family = "exponential"

    def __post_init__(self):
        if not 0.0 < self.rate_out <= self.rate_in:
            raise InvalidParameterError(f"need 0 < rate_out <= rate_in, got {self.rate_in}, {self.rate_out}")

    def loglik(self, s: RegionStats) -> float:
        return (
            s.n_in * math.log(self.rate_in)
            - self.rate_in * s.sum_in
            + s.n_out * math.log(self.rate_out)
            - self.rate_out * s.sum_out
        )

    def params(self) -> dict:
        return {"rate_in": self.rate_in, "rate_out": self.rate_out}

    def region_params(self):
        return (self.rate_in,), (self.rate_out,)


NoiseModel = Bernoulli | Gaussian | Poisson | Exponential

_CLASSES = {"bernoulli": Bernoulli, "gaussian": Gaussian, "poisson": Poisson, "exponential": Exponential}


def check_family(family: str) -> str:
    family = family.lower()
    if family not in FAMILIES:
        raise InvalidParameterError(f"unknown noise family {family!r}; expected one of {FAMILIES}")
    return family


def make_model(family: str, **params) -> NoiseModel:
    return _CLASSES[check_family(family)](**params)


def region_loglik(noise: NoiseModel, stats: RegionStats) -> float:
    """Log-likelihood of the image given the partition.

    Terms that depend on neither the partition nor the parameters
    (``log 2 pi``, ``log y!``) are dropped.
    """
    return noise.loglik(stats)


# ---------------------------------------------------------------------------
# ordered conjugate posterior


class _Beta:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def cdf(self, x):
        return sp.betainc(self.a, self.b, x)

    def sf(self, x):
        return sp.betainc(self.b, self.a, 1.0 - x)

    def ppf(self, p):
        return sp.betaincinv(self.a, self.b, p)

    def isf(self, q):
        return 1.0 - sp.betaincinv(self.b, self.a, q)

    def rvs(self, rng):
        return rng.beta(self.a, self.b)


class _Gamma:
    """Shape-rate Gamma distribution."""

    def __init__(self, shape, rate):
        self.shape, self.rate = shape, rate

    def cdf(self, x):
        return sp.gammainc(self.shape, x * self.rate)

    def sf(self, x):
        return sp.gammaincc(self.shape, x * self.rate)

    def ppf(self, p):
        return sp.gammaincinv(self.shape, p) / self.rate

    def isf(self, q):
        return sp.gammainccinv(self.shape, q) / self.rate

    def rvs(self, rng):
        return rng.gamma(self.shape, 1.0 / self.rate)


class _Normal:
    def __init__(self, mean, sd):
        self.mean, self.sd = mean, sd

    def cdf(self, x):
        return sp.ndtr((x - self.mean) / self.sd)

    def sf(self, x):
        return sp.ndtr((self.mean - x) / self.sd)

    def ppf(self, p):
        return self.mean + self.sd * sp.ndtri(p)

    def isf(self, q):
        return self.mean - self.sd * sp.ndtri(q)

    def rvs(self, rng):
        return rng.normal(self.mean, self.sd)


def truncated_draw(dist, lower: float, upper: float, rng: np.random.Generator) -> float:
    """Inverse-CDF draw from ``dist`` restricted to ``(lower, upper)``."""
    cdf_lo = dist.cdf(lower)
    if cdf_lo > 0.5:
        # upper tail: the survival function keeps precision
        sf_lo, sf_hi = dist.sf(lower), dist.sf(upper)
        if not sf_lo - sf_hi > 0.0:
            return _inside(lower, upper)
        value = dist.isf(sf_lo - rng.uniform() * (sf_lo - sf_hi))
    else:
        cdf_hi = dist.cdf(upper)
        if not cdf_hi - cdf_lo > 0.0:
            return _inside(lower, upper)
        value = dist.ppf(cdf_lo + rng.uniform() * (cdf_hi - cdf_lo))
    return _inside(lower, upper, value)


def _inside(lower, upper, value=None):
    # Guard against ppf round-off landing on (or past) an interval end.
    lo = np.nextafter(lower, np.inf)
    hi = np.nextafter(upper, -np.inf)
    if value is None or not np.isfinite(value):
        if np.isfinite(lower) and np.isfinite(upper):
            return float(0.5 * (lower + upper))
        return float(lo if np.isfinite(lower) else hi)
    return float(min(max(value, lo), hi))


def _ordered_pair(dist_in, dist_out, current, lower, upper, rng, sweeps):
    """Gibbs scans for (x_in, x_out) with independent marginals and x_in > x_out."""
    if current is None:
        x_in, x_out = float(dist_in.rvs(rng)), float(dist_out.rvs(rng))
        if not x_in > x_out:
            x_in, x_out = max(x_in, x_out), min(x_in, x_out)
            if x_in == x_out:
                x_in = np.nextafter(x_in, np.inf)
    else:
        x_in, x_out = current
    for _ in range(sweeps):
        x_in = truncated_draw(dist_in, x_out, upper, rng)
        x_out = truncated_draw(dist_out, lower, x_in, rng)
    return x_in, x_out


def _beta(a, b):
    if a <= 0 or b <= 0:
        raise DegeneratePosteriorError(f"improper Beta({a}, {b}) posterior")
    return _Beta(a, b)


def _gamma(shape, rate):
    if shape <= 0 or rate <= 0:
        raise DegeneratePosteriorError(f"improper Gamma({shape}, {rate}) posterior")
    return _Gamma(shape, rate)


def sample_ordered_posterior(
    family: str,
    prior: PriorHyperparams,
    stats: RegionStats,
    rng: np.random.Generator,
    current: NoiseModel | None = None,
    order: str | None = None,
    sweeps: int | None = None,
    image_mean: float = 0.0,
) -> NoiseModel:
    """Draw region parameters from the order-restricted conjugate posterior.

    Each substep draws one parameter from its conjugate full conditional,
    truncated at the current value of its partner, by inverse CDF.  With
    ``current`` given a single scan is performed, which is the Gibbs kernel
    used inside the chain.  Without it the scan starts from sorted
    unconstrained draws and is repeated ``sweeps`` (default 20) times.
    """
    family = check_family(family)
    if sweeps is None:
        sweeps = 1 if current is not None else 20
    s = stats

    if family == "bernoulli":
        d_in = _beta(prior.beta_a + s.sum_in, prior.beta_b + s.n_in - s.sum_in)
        d_out = _beta(prior.beta_a + s.sum_out, prior.beta_b + s.n_out - s.sum_out)
        cur = None if current is None else (current.p_in, current.p_out)
        p_in, p_out = _ordered_pair(d_in, d_out, cur, 0.0, 1.0, rng, sweeps)
        return Bernoulli(p_in, p_out)

    if family in ("poisson", "exponential"):
        if family == "poisson":
            shape0, rate0 = prior.poisson_shape, prior.poisson_rate
            d_in = _gamma(shape0 + s.sum_in, rate0 + s.n_in)
            d_out = _gamma(shape0 + s.sum_out, rate0 + s.n_out)
        else:
            shape0, rate0 = prior.exponential_shape, prior.exponential_rate
            d_in = _gamma(shape0 + s.n_in, rate0 + s.sum_in)
            d_out = _gamma(shape0 + s.n_out, rate0 + s.sum_out)
        cur = None if current is None else (current.rate_in, current.rate_out)
        r_in, r_out = _ordered_pair(d_in, d_out, cur, 0.0, np.inf, rng, sweeps)
        return _CLASSES[family](r_in, r_out)

    return _sample_gaussian(prior, s, rng, current, order, sweeps, image_mean)


def _sample_gaussian(prior, s, rng, current, order, sweeps, image_mean):
    if order is None:
        order = current.order if current is not None else "both"
    if order not in GAUSSIAN_ORDERS:
        raise InvalidParameterError(f"order must be one of {GAUSSIAN_ORDERS}")
    if s.n_in == 0 or s.n_out == 0:
        raise DegeneratePosteriorError("Gaussian update needs both regions non-empty")
    mu0 = image_mean if prior.normal_mean is None else prior.normal_mean
    prec0 = 1.0 / prior.normal_sd**2
    mean_order = order in ("both", "mean")
    var_order = order in ("both", "variance")

    if current is None:
        m_in, m_out = s.sum_in / s.n_in, s.sum_out / s.n_out
        v_in = max(s.sumsq_in / s.n_in - m_in**2, 1e-12)
        v_out = max(s.sumsq_out / s.n_out - m_out**2, 1e-12)
        start = _project_gaussian(m_in, math.sqrt(v_in), m_out, math.sqrt(v_out), order)
        mu = [start.mu_in, start.mu_out]
        phi = [start.sigma_in**-2, start.sigma_out**-2]
    else:
        mu = [current.mu_in, current.mu_out]
        phi = [current.sigma_in**-2, current.sigma_out**-2]

    counts = (s.n_in, s.n_out)
    sums = (s.sum_in, s.sum_out)
    sumsqs = (s.sumsq_in, s.sumsq_out)
    for _ in range(sweeps):
        for k in (0, 1):
            post_prec = prec0 + counts[k] * phi[k]
            post_mean = (prec0 * mu0 + phi[k] * sums[k]) / post_prec
            dist = _Normal(post_mean, 1.0 / math.sqrt(post_prec))
            lo, hi = -np.inf, np.inf
            if mean_order:
                if k == 0:
                    lo = mu[1]
                else:
                    hi = mu[0]
            mu[k] = truncated_draw(dist, lo, hi, rng)
        for k in (0, 1):
            rss = max(sumsqs[k] - 2.0 * mu[k] * sums[k] + counts[k] * mu[k] ** 2, 0.0)
            dist = _gamma(prior.precision_shape + 0.5 * counts[k], prior.precision_rate + 0.5 * rss)
            lo, hi = 0.0, np.inf
            if var_order:
                # sigma_in > sigma_out  <=>  phi_in < phi_out
                if k == 0:
                    hi = phi[1]
                else:
                    lo = phi[0]
            phi[k] = truncated_draw(dist, lo, hi, rng)
    return Gaussian(mu[0], phi[0] ** -0.5, mu[1], phi[1] ** -0.5, order=order)


# ---------------------------------------------------------------------------
# Hellinger distance


def _bhattacharyya(family: str, pa, pb) -> float:
    if family == "bernoulli":
        (p,), (q,) = pa, pb
        if not (0 <= p <= 1 and 0 <= q <= 1):
            raise InvalidParameterError("Bernoulli probabilities must lie in [0, 1]")
        return math.sqrt(p * q) + math.sqrt((1 - p) * (1 - q))
    if family == "gaussian":
        (m1, s1), (m2, s2) = pa, pb
        if not (s1 > 0 and s2 > 0):
            raise InvalidParameterError("standard deviations must be positive")
        v = s1 * s1 + s2 * s2
        return math.sqrt(2.0 * s1 * s2 / v) * math.exp(-((m1 - m2) ** 2) / (4.0 * v))
    if family == "poisson":
        (l1,), (l2,) = pa, pb
        if not (l1 > 0 and l2 > 0):
            raise InvalidParameterError("rates must be positive")
        return math.exp(-0.5 * (math.sqrt(l1) - math.sqrt(l2)) ** 2)
    (l1,), (l2,) = pa, pb
    if not (l1 > 0 and l2 > 0):
        raise InvalidParameterError("rates must be positive")
    return 2.0 * math.sqrt(l1 * l2) / (l1 + l2)


def hellinger(family: str, params_a, params_b) -> float:
    """Hellinger distance ``h = sqrt(1 - BC)`` between two members of a family.

    Parameters are tuples: ``(p,)``, ``(mu, sigma)``, ``(rate,)``, ``(rate,)``.
    """
    family = check_family(family)
    bc = _bhattacharyya(family, tuple(np.atleast_1d(params_a)), tuple(np.atleast_1d(params_b)))
    return math.sqrt(max(0.0, 1.0 - bc))


def separation(noise: NoiseModel) -> float:
    """Hellinger distance between the fitted inside and outside distributions."""
    inside, outside = noise.region_params()
    return hellinger(noise.family, inside, outside)


# ---------------------------------------------------------------------------
# initialisation


def _separate(hi: float, lo: float, positive: bool = False):
    if hi > lo:
        return hi, lo
    mid = 0.5 * (hi + lo)
    if positive:
        return mid * (1.0 + 1e-6), mid * (1.0 - 1e-6)
    eps = 1e-6 * max(1.0, abs(mid))
    return mid + eps, mid - eps


def _project_gaussian(m_in, s_in, m_out, s_out, order) -> Gaussian:
    if order in ("both", "mean"):
        m_in, m_out = _separate(m_in, m_out)
    if order in ("both", "variance"):
        s_in, s_out = _separate(s_in, s_out, positive=True)
    return Gaussian(m_in, s_in, m_out, s_out, order=order)


def mle_from_stats(family: str, stats: RegionStats, order: str = "both") -> NoiseModel:
    """Region-wise MLEs, projected onto the order constraint if violated.

    Bernoulli proportions carry 0.5 pseudo-counts, ``(N + 0.5) / (n + 1)``,
    so the initial probabilities are never exactly 0 or 1.
    """
    family = check_family(family)
    s = stats
    if s.n_in == 0 or s.n_out == 0:
        raise EmptyRegionError("both regions must contain at least one pixel")
    if family == "bernoulli":
        p_in, p_out = _separate((s.sum_in + 0.5) / (s.n_in + 1), (s.sum_out + 0.5) / (s.n_out + 1))
        return Bernoulli(p_in, p_out)
    if family == "gaussian":
        m_in, m_out = s.sum_in / s.n_in, s.sum_out / s.n_out
        sd_in = math.sqrt(max(s.sumsq_in / s.n_in - m_in**2, 1e-12))
        sd_out = math.sqrt(max(s.sumsq_out / s.n_out - m_out**2, 1e-12))
        return _project_gaussian(m_in, sd_in, m_out, sd_out, order)
    if family == "poisson":
        r_in, r_out = s.sum_in / s.n_in, s.sum_out / s.n_out
    else:
        r_in = s.n_in / s.sum_in if s.sum_in > 0 else 1.0 / _MIN_RATE
        r_out = s.n_out / s.sum_out if s.sum_out > 0 else 1.0 / _MIN_RATE
    r_in, r_out = max(r_in, _MIN_RATE), max(r_out, _MIN_RATE)
    r_in, r_out = _separate(r_in, r_out, positive=True)
    return _CLASSES[family](r_in, r_out)


def mle_given_boundary(image, curve, family: str, order: str = "both") -> NoiseModel:
    """MLEs of the region parameters for the partition induced by ``curve``.

    ``curve`` is a scalar radius, an array of per-pixel radii, or a callable of
    the angle.
    """
    from .geometry import curve_at, membership

    inside = membership(curve_at(curve, image.omega), image)
    return mle_from_stats(family, RegionStats.from_partition(image.y, inside), order=order)


def log_factorial_sum(y) -> float:
    """``sum log(y_i!)``: the constant dropped from the Poisson log-likelihood."""
    return float(sp.gammaln(np.asarray(y, dtype=float) + 1.0).sum())
