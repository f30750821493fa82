"""Exponentially scaled modified Bessel functions of the first kind.

Only integer orders and non-negative real arguments are supported.  Every
public routine returns the scaled quantity ``exp(-x) * I_n(x)``; the raw
``I_n(x)`` overflows double precision for ``x`` of a few hundred, while the
scaled value is bounded by one.

Two evaluation routes are used:

* ``x <= SERIES_CROSSOVER``: the power series
  ``I_n(x) = sum_k (x/2)^(n+2k) / (k! (n+k)!)``, summed in log space so that
  the ``exp(-x)`` factor never underflows separately from the terms.
* ``x > SERIES_CROSSOVER``: Miller's backward recurrence
  ``I_{n-1} = I_{n+1} + (2n/x) I_n``, normalised with the generating-function
  identity ``exp(-x) * (I_0 + 2 sum_{n>=1} I_n) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

SERIES_CROSSOVER = 30.0
TERM_TOLERANCE = 1e-15
MAX_ORDER = 10**6

_RESCALE_AT = 1e250


class BesselDomainError(ValueError):
    """Raised for negative or non-finite arguments, or orders out of range."""


def _check_argument(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise BesselDomainError(f"argument must be finite and >= 0, got {x!r}")
    return x


def _check_order(n: int) -> int:
    if isinstance(n, float):
        if not math.isfinite(n) or n != int(n):
            raise BesselDomainError(f"order must be an integer, got {n!r}")
    n = abs(int(n))
    if n > MAX_ORDER:
        raise BesselDomainError(f"|order| must be <= {MAX_ORDER}, got {n}")
    return n


def _series_single(n: int, x: float) -> float:
    log_half = math.log(0.5 * x)
    log_term = n * log_half - math.lgamma(n + 1.0) - x
    term = 1.0
    total = 1.0
    q = 0.25 * x * x
    k = 0
    while True:
        term *= q / ((k + 1.0) * (n + k + 1.0))
        total += term
        k += 1
        if term < TERM_TOLERANCE * total:
            break
    return math.exp(log_term + math.log(total))


def _series_table(x: float, max_order: int) -> np.ndarray:
    # Enough terms that the last one sits below 1e-17 of the largest for x <= 30.
    n_terms = min(100, int(0.5 * x + 6.0 * math.sqrt(x)) + 25)
    n = np.arange(max_order + 1, dtype=float)[:, None]
    k = np.arange(1, n_terms, dtype=float)[None, :]
    ratios = (0.25 * x * x) / (k * (n + k))
    sums = 1.0 + np.cumprod(ratios, axis=1).sum(axis=1)
    log_first = n[:, 0] * math.log(0.5 * x) - gammaln(n[:, 0] + 1.0) - x
    return np.exp(log_first + np.log(sums))


def _miller_start(x: float, max_order: int) -> int:
    # exp(-x) I_n(x) ~ exp(-n^2 / 2x) for n << x: starting 10 sqrt(x) past the
    # highest requested order leaves both the normalising tail and the
    # recurrence's start-up error below 1e-17.
    return max_order + int(10.0 * math.sqrt(x)) + 50


def _miller_table(x: float, max_order: int) -> np.ndarray:
    start = _miller_start(x, max_order)
    out = np.empty(max_order + 1)
    two_over_x = 2.0 / x
    above, current = 0.0, 1e-300
    # total accumulates I_0 + 2 sum_{n>=1} I_n, which equals exp(x).
    total = 2.0 * current
    for k in range(start, 0, -1):
        below = above + k * two_over_x * current
        above, current = current, below
        total += below if k == 1 else 2.0 * below
        if k - 1 <= max_order:
            out[k - 1] = below
        if below > _RESCALE_AT:
            above /= _RESCALE_AT
            current /= _RESCALE_AT
            total /= _RESCALE_AT
            out[k - 1 :] /= _RESCALE_AT
    return out / total


def scaled_bessel_i(n: int, x: float) -> float:
    """Return ``exp(-x) * I_|n|(x)`` for integer ``n`` and ``x >= 0``."""
    x = _check_argument(x)
    n = _check_order(n)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    # Series converges from its first term when (x/2)^2 / (n+1) is small.
    if x <= SERIES_CROSSOVER or 0.25 * x * x < 0.5 * (n + 1):
        return _series_single(n, x)
    return float(_miller_table(x, n)[n])


@dataclass(frozen=True)
class ScaledBesselTable:
    """``values[n] == exp(-x) * I_n(x)`` for ``n = 0..max_order``."""

    x: float
    max_order: int
    values: np.ndarray

    def __getitem__(self, n: int) -> float:
        return float(self.values[abs(n)])

    def __len__(self) -> int:
        return self.max_order + 1


def scaled_bessel_values(x: float, max_order: int) -> np.ndarray:
    """Array form of :func:`scaled_bessel_table` without the wrapper object."""
    x = _check_argument(x)
    if int(max_order) < 0:
        raise BesselDomainError(f"max_order must be >= 0, got {max_order}")
    max_order = _check_order(max_order)
    if x == 0.0:
        values = np.zeros(max_order + 1)
        values[0] = 1.0
        return values
    if x <= SERIES_CROSSOVER:
        return _series_table(x, max_order)
    return _miller_table(x, max_order)


def scaled_bessel_table(x: float, max_order: int) -> ScaledBesselTable:
    values = scaled_bessel_values(x, max_order)
    values.setflags(write=False)
    return ScaledBesselTable(x=float(x), max_order=int(max_order), values=values)


def tail_order(x: float, tolerance: float = TERM_TOLERANCE) -> int:
    """Smallest ``N`` with ``exp(-2x) I_N(2x)`` below ``tolerance`` times the total mass."""
    x = _check_argument(x)
    if x == 0.0:
        return 0
    n = max(1, int(2.0 * x + 12.0 * math.sqrt(2.0 * x)) + 60)
    values = scaled_bessel_values(2.0 * x, n)
    below = np.nonzero(values < tolerance)[0]
    return int(below[0]) if below.size else n


def weighted_order_moment(x: float, j: int, tail: int | None = None) -> float:
    """Return ``sum_{n=-N..N} exp(-2x) I_n(2x) n^(2j)``.

    With ``j = 0`` this is the generating-function normalisation (exactly one in
    the limit) and with ``j = 1`` the second moment ``2x``.  ``tail`` defaults
    to an order past which the summands fall below ``1e-15`` of the total.
    """
    x = _check_argument(x)
    if j < 0:
        raise BesselDomainError(f"moment index must be >= 0, got {j}")
    if tail is None:
        tail = tail_order(x) + 4 * j + 10
    values = scaled_bessel_values(2.0 * x, tail)
    orders = np.arange(tail + 1, dtype=float)
    weights = orders ** (2 * j)
    # n and -n contribute equally; the n = 0 term is counted once.
    terms = values * weights
    return float(terms[0] + 2.0 * terms[1:].sum())


def moment_bound(x: float, j: int) -> float:
    """Upper bound ``(4j)!/(2j)! * max(x^j, 1)`` for :func:`weighted_order_moment`."""
    x = _check_argument(x)
    return math.factorial(4 * j) / math.factorial(2 * j) * max(x**j, 1.0)


def amos_ratio_bound(n: int, x: float) -> float:
    """Upper bound on ``I_{n+1}(2x) / I_n(2x)``; strictly below one."""
    return 2.0 * x / (n + 0.5 + math.sqrt(4.0 * x * x + (n + 0.5) ** 2))
