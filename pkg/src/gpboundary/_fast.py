"""Compiled inner loops shared by the samplers.

Family codes: 0 Bernoulli, 1 Gaussian, 2 Poisson, 3 Exponential.  ``theta``
holds ``(inside, outside)`` parameters as in the models module, with the
Gaussian packed as ``(mu_in, sigma_in, mu_out, sigma_out)``.
"""

import math

import numba
import numpy as np

FAMILY_CODES = {"bernoulli": 0, "gaussian": 1, "poisson": 2, "exponential": 3}

# uniforms handed to one compiled slice update
UNIFORMS_PER_UPDATE = 256


@numba.njit(cache=True, nogil=True, fastmath=True)
def partition_stats(r, y, base, column, delta, lo, hi):
    """Inside count, sum, sum of squares and clamp count for ``gamma = base + delta * column``.

    The curve is clamped to ``[lo, hi]`` before the ``r < gamma`` test.
    """
    n_in = 0.0
    s_in = 0.0
    q_in = 0.0
    clamped = 0.0
    for i in range(r.shape[0]):
        g = base[i] + delta * column[i]
        clamped += (g < lo) + (g > hi)
        g = min(max(g, lo), hi)
        w = 1.0 * (r[i] < g)
        n_in += w
        s_in += w * y[i]
        q_in += w * y[i] * y[i]
    return int(n_in), s_in, q_in, int(clamped)


@numba.njit(cache=True, nogil=True)
def loglik(family, theta, n_in, s_in, q_in, n, total, total_sq):
    n_out = n - n_in
    if n_in == 0 or n_out == 0:
        return -np.inf
    s_out = total - s_in
    if family == 0:
        return (
            s_in * math.log(theta[0])
            + (n_in - s_in) * math.log1p(-theta[0])
            + s_out * math.log(theta[1])
            + (n_out - s_out) * math.log1p(-theta[1])
        )
    if family == 1:
        mu1, sd1, mu2, sd2 = theta[0], theta[1], theta[2], theta[3]
        q_out = total_sq - q_in
        rss_in = q_in - 2.0 * mu1 * s_in + n_in * mu1 * mu1
        rss_out = q_out - 2.0 * mu2 * s_out + n_out * mu2 * mu2
        return (
            -n_in * math.log(sd1)
            - n_out * math.log(sd2)
            - 0.5 * rss_in / (sd1 * sd1)
            - 0.5 * rss_out / (sd2 * sd2)
        )
    if family == 2:
        return (
            s_in * math.log(theta[0])
            - n_in * theta[0]
            + s_out * math.log(theta[1])
            - n_out * theta[1]
        )
    return n_in * math.log(theta[0]) - theta[0] * s_in + n_out * math.log(theta[1]) - theta[1] * s_out


@numba.njit(cache=True, nogil=True)
def _full_logdens(z, z0, r, y, gamma, col, prec, family, theta, total, total_sq, lo, hi, counts):
    n_in, s_in, q_in, _ = partition_stats(r, y, gamma, col, z - z0, lo, hi)
    counts[0] += 1
    ll = loglik(family, theta, n_in, s_in, q_in, r.shape[0], total, total_sq)
    return ll - 0.5 * prec * z * z


@numba.njit(cache=True, nogil=True)
def _split_interval(r, y, gamma, col, d_left, d_right, lo, hi, active):
    """Stats of pixels inside for every shift in [d_left, d_right]; the rest go to ``active``.

    Membership is monotone in the shift, so a pixel with equal membership at
    both ends never changes inside the interval.
    """
    n_fix = 0
    s_fix = 0.0
    q_fix = 0.0
    m = 0
    for i in range(r.shape[0]):
        g_left = min(max(gamma[i] + d_left * col[i], lo), hi)
        g_right = min(max(gamma[i] + d_right * col[i], lo), hi)
        in_left = r[i] < g_left
        if in_left == (r[i] < g_right):
            if in_left:
                n_fix += 1
                s_fix += y[i]
                q_fix += y[i] * y[i]
        else:
            active[m] = i
            m += 1
    return n_fix, s_fix, q_fix, m


@numba.njit(cache=True, nogil=True)
def _active_loglik(d, r, y, gamma, col, family, theta, total, total_sq, lo, hi, fixed, active, m, counts):
    n_in = fixed[0]
    s_in = fixed[1]
    q_in = fixed[2]
    for j in range(m):
        i = active[j]
        g = min(max(gamma[i] + d * col[i], lo), hi)
        if r[i] < g:
            n_in += 1
            s_in += y[i]
            q_in += y[i] * y[i]
    counts[0] += 1
    return loglik(family, theta, int(n_in), s_in, q_in, r.shape[0], total, total_sq)


@numba.njit(cache=True, nogil=True)
def slice_coordinate(r, y, gamma, col, z0, ll0, prec, family, theta, total, total_sq, width, max_steps, lo, hi, u, counts):
    """Stepping-out and shrinkage slice update of one curve coefficient.

    ``gamma`` is the current curve at the pixels and ``ll0`` its
    log-likelihood; the target is ``loglik - prec * z^2 / 2``.  This is the
    procedure of the generic Python slice sampler, with the random numbers
    supplied in ``u``.  Once the interval is fixed, shrinkage evaluations
    only revisit pixels whose membership can change in it.  On return
    ``gamma`` has been moved to the new coefficient in place.  ``counts``
    accumulates evaluations, step-outs and shrinks.

    Returns the new coefficient and its log-likelihood.
    """
    level = ll0 - 0.5 * prec * z0 * z0 + math.log(u[0])
    left = z0 - width * u[1]
    right = left + width
    steps_left = int(math.floor(max_steps * u[2]))
    steps_right = max_steps - 1 - steps_left
    while steps_left > 0:
        if _full_logdens(left, z0, r, y, gamma, col, prec, family, theta, total, total_sq, lo, hi, counts) <= level:
            break
        left -= width
        steps_left -= 1
        counts[1] += 1
    while steps_right > 0:
        if _full_logdens(right, z0, r, y, gamma, col, prec, family, theta, total, total_sq, lo, hi, counts) <= level:
            break
        right += width
        steps_right -= 1
        counts[1] += 1

    active = np.empty(r.shape[0], dtype=np.int64)
    n_fix, s_fix, q_fix, m = _split_interval(r, y, gamma, col, left - z0, right - z0, lo, hi, active)
    fixed = np.array([float(n_fix), s_fix, q_fix])
    z1 = z0
    ll1 = ll0
    for j in range(3, u.shape[0]):
        x1 = left + u[j] * (right - left)
        ll = _active_loglik(x1 - z0, r, y, gamma, col, family, theta, total, total_sq, lo, hi, fixed, active, m, counts)
        if ll - 0.5 * prec * x1 * x1 > level:
            z1 = x1
            ll1 = ll
            break
        counts[2] += 1
        if x1 < z0:
            left = x1
        else:
            right = x1
        if right - left < 1e-14 * max(1.0, abs(z0)):
            break
    d = z1 - z0
    for i in range(gamma.shape[0]):
        gamma[i] += d * col[i]
    return z1, ll1


def warm_up():
    a = np.zeros(2)
    partition_stats(a, a, a, a, 0.0, 0.0, 1.0)
