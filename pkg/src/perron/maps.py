"""The one-dimensional maps studied by the package.

Four families are supported:

``smooth-expanding``  ``x -> 2x + a sin(2 pi x) (mod 1)``, ``0 <= a < 1/(2 pi)``
``piecewise``         ``x + 1/2`` on ``[0, 1/2]``, ``2(1 - x)`` on ``(1/2, 1)``
``quadratic``         ``x -> 0.9 - a x^2`` on ``[-1, 1]``
``neutral``           ``x + 2^alpha x^(1+alpha)`` on ``[0, 1/2]``,
                      ``2x - 1`` on ``(1/2, 1)``

Periodic maps act on ``[0, 1)`` and reduce modulo 1 (``1`` maps to ``0``).
Inverse branches are exposed both point-wise (:func:`inverse_branches`) and
vectorised over many points (:meth:`MapModel.preimages`), which is what the
transfer operator uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DomainError, NumericError, OneSidedDerivativeError,
                     ParameterError, UnsupportedMapError)

__all__ = [
    "MapModel",
    "make_map",
    "forward",
    "derivative",
    "inverse_branches",
    "critical_orbit",
    "MISIUREWICZ_A",
    "MISIUREWICZ_A2",
    "MISIUREWICZ_FIXED_POINT",
]

MISIUREWICZ_A = 1.7152100141023
MISIUREWICZ_A2 = 1.777776174649396
MISIUREWICZ_FIXED_POINT = 0.489320111422868

ALIASES = {
    "map1": "smooth-expanding",
    "smooth": "smooth-expanding",
    "map2": "piecewise",
    "map3": "quadratic",
    "map4": "neutral",
}

# integer codes understood by the compiled kernels
KERNEL_CODES = {"smooth-expanding": 0, "piecewise": 1, "quadratic": 2,
                "neutral": 3}

_MAX_ITER = 100
_ABS_TOL = 1e-14


@dataclass(frozen=True)
class MapModel:
    """An immutable description of one map.

    ``segments`` lists the closed sub-intervals between consecutive
    discontinuities; ``branch_segment[j]`` says on which of them inverse
    branch ``j`` takes its values.  Interpolation stencils for branch ``j``
    may only use nodes of that segment.
    """

    id: str
    params: dict
    domain: tuple
    periodic: bool
    discontinuities: tuple
    branch_count: int
    segments: tuple = field(repr=False)
    branch_segment: tuple = field(repr=False)

    @property
    def a(self):
        return self.params.get("a")

    @property
    def alpha(self):
        return self.params.get("alpha")

    @property
    def supports_inverse(self):
        return self.id != "quadratic"

    @property
    def dyadic(self):
        """True when floating-point orbits collapse onto dyadic rationals.

        Binary-shift branches (``2x``, ``2(1-x)``, ``2x - 1``) discard one
        mantissa bit per step, so noiseless simulated orbits die after about
        fifty iterates.
        """
        return (self.id in ("piecewise", "neutral")
                or (self.id == "smooth-expanding" and self.a == 0.0))

    @property
    def kernel_code(self):
        return KERNEL_CODES[self.id]

    @property
    def kernel_param(self):
        return float(self.params.get("a", self.params.get("alpha", 0.0)))

    # --- vectorised evaluation -------------------------------------------

    def _check_domain(self, x):
        lo, hi = self.domain
        bad = (x < lo) | (x > hi) | ~np.isfinite(x)
        if np.any(bad):
            raise DomainError(
                f"{self.id}: point {x[bad].flat[0]!r} outside [{lo}, {hi}]")

    def _reduce(self, y):
        if not self.periodic:
            return y
        r = np.mod(y, 1.0)
        return np.where(r >= 1.0, 0.0, r)

    def forward_array(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        if self.periodic:
            x = self._reduce(x)
        if self.id == "smooth-expanding":
            y = 2.0 * x + self.a * np.sin(2.0 * np.pi * x)
        elif self.id == "piecewise":
            y = np.where(x <= 0.5, x + 0.5, 2.0 * (1.0 - x))
        elif self.id == "quadratic":
            return 0.9 - self.a * x * x
        else:
            al = self.alpha
            y = np.where(x <= 0.5, x + 2.0 ** al * x ** (1.0 + al), 2.0 * x - 1.0)
        return self._reduce(y)

    def derivative_array(self, x):
        """Closed-form derivative; no check for discontinuities."""
        x = np.asarray(x, dtype=float)
        if self.id == "smooth-expanding":
            return 2.0 + 2.0 * np.pi * self.a * np.cos(2.0 * np.pi * x)
        if self.id == "piecewise":
            return np.where(x <= 0.5, 1.0, -2.0)
        if self.id == "quadratic":
            return -2.0 * self.a * x
        al = self.alpha
        return np.where(x <= 0.5,
                        1.0 + (1.0 + al) * 2.0 ** al * np.abs(x) ** al, 2.0)

    def preimages(self, x):
        """All inverse-branch preimages of the points ``x``.

        Returns
        -------
        y : ndarray, shape (n, branch_count)
            Preimage on each branch (undefined where ``valid`` is False).
        dfabs : ndarray, shape (n, branch_count)
            ``|f'(y)|``.
        valid : ndarray of bool, shape (n, branch_count)
        """
        if not self.supports_inverse:
            raise UnsupportedMapError(
                "the quadratic map has no inverse-branch support; "
                "use the Monte Carlo estimators")
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        x = self._reduce(x)
        n = x.size
        y = np.zeros((n, 2))
        valid = np.ones((n, 2), dtype=bool)
        if self.id == "smooth-expanding":
            y[:, 0] = _smooth_inverse(self.a, x, 0)
            y[:, 1] = _smooth_inverse(self.a, x, 1)
            dfabs = np.abs(self.derivative_array(y))
        elif self.id == "piecewise":
            valid[:, 0] = x >= 0.5
            y[:, 0] = np.where(valid[:, 0], x - 0.5, 0.0)
            y[:, 1] = 1.0 - 0.5 * x
            dfabs = np.empty((n, 2))
            dfabs[:, 0] = 1.0
            dfabs[:, 1] = 2.0
        else:
            y[:, 0] = _neutral_inverse(self.alpha, x)
            y[:, 1] = 0.5 * (x + 1.0)
            dfabs = np.abs(self.derivative_array(y))
        return y, dfabs, valid


def _raise_unconverged(x, todo, what):
    bad = x[todo]
    raise NumericError(
        f"{what} root-finder did not converge after {_MAX_ITER} iterations "
        f"at x={bad[0]!r}", value=float(bad[0]))


def _smooth_inverse(a, x, branch):
    """Solve ``2y + a sin(2 pi y) = x + branch`` on ``[branch/2, (branch+1)/2]``.

    The lift is strictly increasing (slope >= 2 - 2 pi a), so a bisection
    bracket is always valid and Newton steps are only accepted inside it.
    """
    target = x + branch
    lo = np.full_like(x, 0.5 * branch)
    hi = lo + 0.5
    y = 0.5 * target
    if a == 0.0:
        return y
    todo = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        g = 2.0 * y + a * np.sin(2.0 * np.pi * y) - target
        dg = 2.0 + 2.0 * np.pi * a * np.cos(2.0 * np.pi * y)
        lo = np.where(g < 0.0, y, lo)
        hi = np.where(g > 0.0, y, hi)
        step = g / dg
        y_new = y - step
        outside = (y_new <= lo) | (y_new >= hi)
        y_new = np.where(outside, 0.5 * (lo + hi), y_new)
        todo = np.abs(y_new - y) > _ABS_TOL
        y = y_new
        if not todo.any():
            return y
    _raise_unconverged(x, todo, "smooth-expanding")


def _neutral_inverse(alpha, x):
    """Solve ``y + 2^alpha y^(1+alpha) = x`` on ``[0, 1/2]``.

    The bracket ``[x / (1 + c x^alpha), x]`` holds because the left side is
    increasing; tolerance is relative near the neutral point so that the
    tiny nodes of a graded grid keep full precision.
    """
    c = 2.0 ** alpha
    lo = x / (1.0 + c * x ** alpha)
    hi = x.copy()
    y = lo.copy()
    todo = x > 0.0
    for _ in range(_MAX_ITER):
        ya = np.abs(y)
        g = y + c * ya ** (1.0 + alpha) - x
        dg = 1.0 + (1.0 + alpha) * c * ya ** alpha
        lo = np.where(g < 0.0, y, lo)
        hi = np.where(g > 0.0, y, hi)
        y_new = y - g / dg
        outside = (y_new < lo) | (y_new > hi)
        y_new = np.where(outside, 0.5 * (lo + hi), y_new)
        tol = np.minimum(_ABS_TOL, 1e-15 * np.abs(y_new))
        todo = (np.abs(y_new - y) > tol) & (g != 0.0)
        y = np.where(x > 0.0, y_new, 0.0)
        if not todo.any():
            return y
    _raise_unconverged(x, todo, "neutral")


def make_map(name, **params):
    """Construct a :class:`MapModel` by name or alias (``map1`` .. ``map4``)."""
    kind = ALIASES.get(name, name)
    if kind == "smooth-expanding":
        a = float(params.pop("a", 0.15))
        if not 0.0 <= a < 1.0 / (2.0 * math.pi):
            raise ParameterError(f"smooth-expanding needs 0 <= a < 1/(2 pi), got {a}")
        m = MapModel(kind, {"a": a}, (0.0, 1.0), True, (), 2,
                     segments=((0.0, 1.0),), branch_segment=(0, 0))
    elif kind == "piecewise":
        m = MapModel(kind, {}, (0.0, 1.0), True, (0.0, 0.5), 2,
                     segments=((0.0, 0.5), (0.5, 1.0)), branch_segment=(0, 1))
    elif kind == "quadratic":
        a = float(params.pop("a", MISIUREWICZ_A))
        if not 0.0 < a <= 1.8:
            raise ParameterError(f"quadratic needs 0 < a <= 1.8, got {a}")
        m = MapModel(kind, {"a": a}, (-1.0, 1.0), False, (0.0,), 0,
                     segments=((-1.0, 1.0),), branch_segment=())
    elif kind == "neutral":
        alpha = float(params.pop("alpha", 0.5))
        if not 0.0 < alpha < 1.0:
            raise ParameterError(f"neutral needs 0 < alpha < 1, got {alpha}")
        m = MapModel(kind, {"alpha": alpha}, (0.0, 1.0), True, (0.0, 0.5), 2,
                     segments=((0.0, 0.5), (0.5, 1.0)), branch_segment=(0, 1))
    else:
        raise ParameterError(f"unknown map {name!r}")
    if params:
        raise ParameterError(f"unexpected parameters for {kind}: {sorted(params)}")
    return m


def forward(m, x):
    """Image of a single point, reduced modulo 1 on periodic maps."""
    return float(m.forward_array(np.array([x], dtype=float))[0])


def derivative(m, x):
    """``f'(x)``; raises at a declared discontinuity."""
    x = float(x)
    m._check_domain(np.array([x]))
    xr = x % 1.0 if m.periodic else x
    for d in m.discontinuities:
        if xr == d:
            raise OneSidedDerivativeError(
                f"{m.id}: f' is one-sided at x={x}; evaluate just left or right")
    return float(m.derivative_array(np.array([xr]))[0])


def inverse_branches(m, x):
    """List of ``(preimage, |f'(preimage)|)`` pairs for one point."""
    y, dfabs, valid = m.preimages(np.array([x], dtype=float))
    return [(float(y[0, j]), float(dfabs[0, j]))
            for j in range(y.shape[1]) if valid[0, j]]


def critical_orbit(m, steps):
    """Forward orbit ``0, f(0), ..., f^steps(0)`` of the quadratic critical point."""
    if m.id != "quadratic":
        raise UnsupportedMapError("critical orbits are defined for the quadratic map")
    orbit = [0.0]
    for _ in range(steps):
        orbit.append(0.9 - m.a * orbit[-1] ** 2)
    return orbit
