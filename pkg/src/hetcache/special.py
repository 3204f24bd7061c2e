"""Exponential integrals and the truncated-Poisson inverse mean.

Real arguments only. ``E1`` uses its power series up to ``x = 1`` and the
Lentz continued fraction beyond. ``Ei`` uses the convergent series up to
``x = 40`` and the asymptotic expansion above, where the smallest term is
already below double precision.
"""

import math

from .errors import DomainError, NumericError

__all__ = [
    "EULER_GAMMA",
    "exp_integral_E1",
    "exp_integral_E1_scaled",
    "exp_integral_Ei",
    "exp_integral_Ei_scaled",
    "truncated_poisson_inverse_mean",
]

EULER_GAMMA = 0.57721566490153286061

_E1_SERIES_MAX = 1.0
_EI_SERIES_MAX = 40.0
_KAPPA_SERIES_MAX = 30.0
_EPS = 1e-17


def _check_positive(x, name):
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"{name} must be positive, got {x!r}")
    return x


def _e1_series(x):
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total) or k > 200:
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_scaled_cf(x):
    # e^x E1(x) by modified Lentz on 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericError(f"E1 continued fraction did not converge at x={x}")


def exp_integral_E1(x):
    """Exponential integral ``E1(x) = int_x^inf e^-t / t dt`` for ``x > 0``.

    Underflows to 0 for ``x`` beyond ~700; use
    :func:`exp_integral_E1_scaled` there.
    """
    x = _check_positive(x, "x")
    if math.isinf(x):
        return 0.0
    if x <= _E1_SERIES_MAX:
        return _e1_series(x)
    return math.exp(-x) * _e1_scaled_cf(x)


def exp_integral_E1_scaled(x):
    """Return ``e^x * E1(x)``, finite for every ``x > 0``."""
    x = _check_positive(x, "x")
    if x <= _E1_SERIES_MAX:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_cf(x)


def _ei_series_sum(x):
    # sum_{k>=1} x^k / (k k!)
    total = 0.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= x / k
        contrib = term / k
        total += contrib
        if contrib < _EPS * total:
            return total


def _ei_scaled_asymptotic(x):
    # e^-x Ei(x) ~ (1/x) sum_k k!/x^k, truncated at the smallest term
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * k / x
        if nxt >= term or nxt < _EPS:
            break
        term = nxt
        total += term
    return total / x


def exp_integral_Ei(x):
    """Principal-value exponential integral ``Ei(x)`` for ``x > 0``.

    Negative arguments are served through ``Ei(-x) = -E1(x)``.
    """
    x = _check_positive(x, "x")
    if x <= _EI_SERIES_MAX:
        return EULER_GAMMA + math.log(x) + _ei_series_sum(x)
    if x > 700.0:
        return math.inf
    return math.exp(x) * _ei_scaled_asymptotic(x)


def exp_integral_Ei_scaled(x):
    """Return ``e^-x * Ei(x)`` without overflow."""
    x = _check_positive(x, "x")
    if x <= _EI_SERIES_MAX:
        return math.exp(-x) * (EULER_GAMMA + math.log(x) + _ei_series_sum(x))
    return _ei_scaled_asymptotic(x)


def truncated_poisson_inverse_mean(mean):
    """``E[1/U]`` for ``U ~ Poisson(mean)`` conditioned on ``U >= 1``.

    Equals ``e^-mu / (1 - e^-mu) * (Ei(mu) - ln mu - gamma)``. The series
    form is used up to ``mu = 30`` to avoid the cancellation in
    ``Ei(mu) - ln mu - gamma`` near zero.

    Examples
    --------
    >>> round(truncated_poisson_inverse_mean(1.0), 5)
    0.76699
    """
    mu = _check_positive(mean, "mean")
    if math.isinf(mu):
        raise DomainError("mean must be finite")
    if mu <= _KAPPA_SERIES_MAX:
        return _ei_series_sum(mu) / math.expm1(mu)
    scaled = exp_integral_Ei_scaled(mu) - math.exp(-mu) * (math.log(mu) + EULER_GAMMA)
    return scaled / -math.expm1(-mu)
