"""Per-angle split baselines followed by penalized Fourier smoothing.

Both baselines look at the pixels in a narrow angular band around each of
``n_angles`` equally spaced directions, pick one split radius along the
band, and smooth the raw radii with a ridge-penalized trigonometric fit.

* MCE (maximum contrast): the split maximizing the absolute difference of
  the sample means on the two sides.
* CP (change point): the single change point maximizing a two-segment
  likelihood.  Rays whose likelihood gain does not beat an MBIC-type penalty
  are flagged and filled in from their neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import CORNER_RADIUS, MIN_RADIUS, TWO_PI, PolarImage, max_radius

MIN_SIDE = 5
MIN_BAND_PIXELS = 20
DEFAULT_ANGLES = 1000
DEFAULT_HALFWIDTH = math.pi / 64
DEFAULT_PENALTY = 1e-3
# per-ray detection threshold in units of log n (MBIC-type)
CP_PENALTY = 3.0


class InsufficientBandDataError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineFit:
    """Raw per-angle split radii and their smoothed trigonometric fit."""

    method: str
    angles: np.ndarray
    raw: np.ndarray
    flagged: np.ndarray  # rays with no detected split (CP only)
    coefficients: np.ndarray

    @property
    def n_basis(self) -> int:
        return len(self.coefficients)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        values = fourier_design(omega.ravel(), self.n_basis) @ self.coefficients
        out = np.clip(values, MIN_RADIUS, CORNER_RADIUS).reshape(omega.shape)
        return float(out) if out.ndim == 0 else out


def fourier_design(omega, n_basis: int) -> np.ndarray:
    """Columns ``1, cos w, sin w, cos 2w, ...`` (unnormalized)."""
    if n_basis < 1 or n_basis % 2 == 0:
        raise ValueError("n_basis must be a positive odd integer")
    omega = np.asarray(omega, dtype=float)
    cols = [np.ones_like(omega)]
    for j in range(1, (n_basis - 1) // 2 + 1):
        cols += [np.cos(j * omega), np.sin(j * omega)]
    return np.column_stack(cols)


def fourier_smooth(angles, radii, n_basis: int, penalty: float = DEFAULT_PENALTY) -> np.ndarray:
    """Coefficients minimizing ``mean((r - X b)^2) + penalty * |b[1:]|^2``."""
    X = fourier_design(angles, n_basis)
    n = len(radii)
    ridge = np.full(n_basis, penalty)
    ridge[0] = 0.0
    return np.linalg.solve(X.T @ X / n + np.diag(ridge), X.T @ np.asarray(radii, dtype=float) / n)


def _bands(image: PolarImage, n_angles: int, halfwidth: float):
    """Yield ``(angle, radii, values)`` per band, radii sorted ascending."""
    if not 0 < halfwidth < math.pi:
        raise ValueError("band half-width must lie in (0, pi)")
    order = np.argsort(image.omega, kind="stable")
    omega = image.omega[order]
    r, y = image.r[order], image.y[order]
    # pad one period on each side so a band never needs wrap-around logic
    ext = np.concatenate([omega - TWO_PI, omega, omega + TWO_PI])
    angles = np.arange(n_angles) * (TWO_PI / n_angles)
    lo = np.searchsorted(ext, angles - halfwidth, side="left")
    hi = np.searchsorted(ext, angles + halfwidth, side="right")
    n = len(omega)
    for angle, i, j in zip(angles, lo, hi):
        idx = np.arange(i, j) % n
        if idx.size < MIN_BAND_PIXELS:
            raise InsufficientBandDataError(
                f"band at angle {angle:.4f} holds {idx.size} pixels (< {MIN_BAND_PIXELS}); widen the band"
            )
        rb, yb = r[idx], y[idx]
        s = np.argsort(rb, kind="stable")
        yield angle, rb[s], yb[s]


def _split_radius(radii, k):
    # split between the k-th and (k+1)-th sorted pixels
    return 0.5 * (radii[k - 1] + radii[k])


def _segment_sums(values):
    # sums over the first k values for k = MIN_SIDE .. n - MIN_SIDE
    n = len(values)
    k = np.arange(MIN_SIDE, n - MIN_SIDE + 1)
    cs = np.concatenate([[0.0], np.cumsum(values)])
    return k, cs[k], cs[n] - cs[k]


def mce_split(radii, values) -> float:
    """Split radius maximizing ``|mean inside - mean outside|``; the first maximizer wins."""
    n = len(values)
    k, s_in, s_out = _segment_sums(values)
    contrast = np.abs(s_in / k - s_out / (n - k))
    return _split_radius(radii, k[int(np.argmax(contrast))])


def _bernoulli_ll(s, n):
    p = s / n
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s * np.log(p) + (n - s) * np.log1p(-p)
    return np.nan_to_num(out, nan=0.0)  # 0 log 0 = 0


def cp_split(radii, values, family: str = "gaussian") -> tuple[float, float, bool]:
    """Single change point along a ray.

    Gaussian: mean change with a common variance, twice the log-likelihood
    gain being ``n log(RSS_0 / RSS_1)``.  Bernoulli: two proportions.
    Returns ``(radius, gain, detected)`` with ``detected`` meaning the gain
    exceeds ``CP_PENALTY * log n``.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    k, s_in, s_out = _segment_sums(values)
    if family == "bernoulli":
        ll1 = _bernoulli_ll(s_in, k) + _bernoulli_ll(s_out, n - k)
        gains = 2.0 * (ll1 - _bernoulli_ll(values.sum(), n))
    else:
        _, q_in, q_out = _segment_sums(values * values)
        rss1 = q_in - s_in**2 / k + q_out - s_out**2 / (n - k)
        rss0 = float(np.sum((values - values.mean()) ** 2))
        tiny = 1e-300
        gains = n * (np.log(max(rss0, tiny)) - np.log(np.maximum(rss1, tiny)))
    best = int(np.argmax(gains))
    gain = float(gains[best])
    return _split_radius(radii, k[best]), gain, gain > CP_PENALTY * math.log(n)


def _fill_flagged(angles, raw, flagged):
    # periodic linear interpolation from detected neighbours; frame if none detected
    if flagged.all():
        return max_radius(angles)
    if not flagged.any():
        return raw
    good = ~flagged
    xp = np.concatenate([angles[good] - TWO_PI, angles[good], angles[good] + TWO_PI])
    fp = np.tile(raw[good], 3)
    out = raw.copy()
    out[flagged] = np.interp(angles[flagged], xp, fp)
    return out


def mce_baseline(
    image: PolarImage,
    n_angles: int = DEFAULT_ANGLES,
    band_halfwidth: float = DEFAULT_HALFWIDTH,
    n_basis: int = 5,
    penalty: float = DEFAULT_PENALTY,
) -> BaselineFit:
    angles, raw = [], []
    for angle, radii, values in _bands(image, n_angles, band_halfwidth):
        angles.append(angle)
        raw.append(mce_split(radii, values))
    angles, raw = np.array(angles), np.array(raw)
    coef = fourier_smooth(angles, raw, n_basis, penalty)
    return BaselineFit("mce", angles, raw, np.zeros(len(raw), dtype=bool), coef)


def cp_baseline(
    image: PolarImage,
    n_angles: int = DEFAULT_ANGLES,
    n_basis: int = 5,
    family: str = "gaussian",
    band_halfwidth: float = DEFAULT_HALFWIDTH,
    penalty: float = DEFAULT_PENALTY,
) -> BaselineFit:
    angles, raw, flagged = [], [], []
    for angle, radii, values in _bands(image, n_angles, band_halfwidth):
        radius, _, detected = cp_split(radii, values, family)
        angles.append(angle)
        raw.append(radius)
        flagged.append(not detected)
    angles, raw, flagged = np.array(angles), np.array(raw), np.array(flagged)
    filled = _fill_flagged(angles, raw, flagged)
    coef = fourier_smooth(angles, filled, n_basis, penalty)
    return BaselineFit("cp", angles, filled, flagged, coef)


BASELINES = {"mce": mce_baseline, "cp": cp_baseline}


def run_baseline(method: str, image: PolarImage, n_basis: int = 5, **kwargs) -> BaselineFit:
    method = method.lower()
    if method not in BASELINES:
        raise ValueError(f"unknown baseline {method!r}; expected one of {sorted(BASELINES)}")
    if method == "cp":
        kwargs.setdefault("family", "bernoulli" if image.meta.get("family") == "bernoulli" else "gaussian")
    return BASELINES[method](image, n_basis=n_basis, **kwargs)
