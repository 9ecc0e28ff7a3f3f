"""Power-law exponents from log-log least squares, with error bounds.

All logarithms are base 10.  The fit is ordinary (unweighted) least squares
of ``log10(value)`` on ``log10(eps)`` over the points whose ``eps`` lies in
a caller-supplied range.  Two error bounds are provided: one propagating
known absolute errors of ``log10(value)`` through the slope formula, one for
histogram estimates whose variance follows from counting statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, ParameterError

__all__ = [
    "PowerLawFit",
    "fit_power_law",
    "gamma_error_from_value_errors",
    "gamma_error_from_counting",
    "richardson",
    "select_points",
]

MIN_POINTS = 3
# the slope bounds only need the eps values to have nonzero spread
MIN_BOUND_POINTS = 2


@dataclass(frozen=True)
class PowerLawFit:
    gamma: float
    intercept: float
    delta_gamma: float
    fit_range: tuple
    points: tuple

    def predict(self, eps):
        return 10.0 ** (self.intercept + self.gamma * np.log10(eps))


def _as_points(points):
    out = []
    for p in points:
        if len(p) == 2:
            e, v = p
            err = 0.0
        else:
            e, v, err = p[:3]
        out.append((float(e), float(v), float(err)))
    return out


def select_points(points, fit_range):
    """Points whose ``eps`` lies in the closed ``fit_range``."""
    lo, hi = fit_range
    if not (lo > 0.0 and hi >= lo):
        raise ParameterError(f"bad fit range {fit_range}")
    # the range is usually given in log10 units and converted back, so allow
    # for the last-bit rounding of 10**x
    tol = 1e-12
    return [p for p in _as_points(points)
            if lo * (1.0 - tol) <= p[0] <= hi * (1.0 + tol)]


def _centered(used):
    le = np.log10([p[0] for p in used])
    mu = le.mean()
    var = ((le - mu) ** 2).mean()
    if var == 0.0:
        raise InsufficientDataError("all eps values coincide")
    return le, mu, var


def _usable(points, fit_range, need_positive=True, minimum=MIN_POINTS):
    used = select_points(points, fit_range)
    if len(used) < minimum:
        raise InsufficientDataError(
            f"{len(used)} points inside {fit_range}, need {minimum}")
    if need_positive:
        bad = [p for p in used if not p[1] > 0.0]
        if bad:
            raise DomainError(f"nonpositive value {bad[0][1]} at eps={bad[0][0]}")
    return used


def fit_power_law(points, fit_range):
    """Slope and intercept of the log-log line through the in-range points.

    ``points`` holds ``(eps, value)`` or ``(eps, value, value_error)``
    tuples.  ``delta_gamma`` is the propagated bound from the value errors
    (zero when none are given).
    """
    used = _usable(points, fit_range)
    le, mu, var = _centered(used)
    lv = np.log10([p[1] for p in used])
    slope = float(((le - mu) * (lv - lv.mean())).mean() / var)
    intercept = float(lv.mean() - slope * mu)
    dg = _value_error_bound(used, le, mu, var)
    return PowerLawFit(slope, intercept, dg, (float(fit_range[0]), float(fit_range[1])),
                       tuple(used))


def _log_error(p):
    """Absolute error of ``log10(value)`` implied by an absolute value error."""
    e, v, err = p
    if err == 0.0:
        return 0.0
    return math.log10(v + err) - math.log10(v) if v > 0.0 else math.inf


def _value_error_bound(used, le, mu, var):
    da = np.array([_log_error(p) for p in used])
    return float(np.mean(np.abs((le - mu) / var) * da))


def gamma_error_from_value_errors(points, fit_range):
    """``(1/n) sum_i |(log10 eps_i - mu) / sigma^2| dA_i``.

    Here ``points`` carry ``(eps, value, dA)`` with ``dA`` already an
    absolute error of ``log10(value)``.
    """
    used = _usable(points, fit_range, need_positive=False, minimum=MIN_BOUND_POINTS)
    le, mu, var = _centered(used)
    da = np.array([p[2] for p in used])
    if np.any(da < 0.0):
        raise ParameterError("log errors must be nonnegative")
    return float(np.mean(np.abs((le - mu) / var) * da))


def gamma_error_from_counting(points, bins, steps, fit_range):
    """Counting-statistics bound on the slope standard deviation.

    ``(1/n) sqrt(sum_i ((log10 eps_i - mu) / sigma^2)^2 (N/M) / Phi_i^2)``
    with ``Phi_i`` the estimates (the formula is used as printed, without
    ``ln 10`` factors).
    """
    used = _usable(points, fit_range, need_positive=False, minimum=MIN_BOUND_POINTS)
    phi = np.array([p[1] for p in used])
    if np.any(phi <= 0.0):
        raise DomainError("Phi estimates must be positive")
    le, mu, var = _centered(used)
    n = len(used)
    return float(math.sqrt(np.sum(((le - mu) / var) ** 2 * (bins / steps) / phi ** 2)) / n)


def richardson(value_h, value_h2, order):
    """Richardson extrapolation ``(2^p v_{h/2} - v_h) / (2^p - 1)``."""
    if order == 0:
        raise ParameterError("order must be nonzero")
    f = 2.0 ** order
    return (f * value_h2 - value_h) / (f - 1.0)
