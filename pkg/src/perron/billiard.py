"""Stadium billiard in boundary coordinates.

A state is ``(x, theta)``: ``x`` is the counter-clockwise arclength from
the rightmost boundary point, ``theta`` the angle between the outgoing
velocity and the counter-clockwise tangent.  The boundary is split into four
pieces by arclength:

``A`` (0)  right semicircle, ``x < q`` or ``x >= 3q + 4w``
``B`` (1)  top flat edge, ``q <= x < q + 2w``
``C`` (2)  left semicircle
``D`` (3)  bottom flat edge

with ``q = pi r / 2`` and ``w`` the flat half-length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import _backend
from .errors import DomainError, GrazingOrbitError, ParameterError

__all__ = [
    "StadiumGeometry",
    "BilliardState",
    "collide",
    "reverse",
    "perturb_theta",
    "boundary_point",
    "arclength_of",
    "SEGMENTS",
]

SEGMENTS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class StadiumGeometry:
    half_width: float = 1.0
    radius: float = 1.0

    def __post_init__(self):
        if not (self.half_width > 0.0 and self.radius > 0.0):
            raise ParameterError("stadium half_width and radius must be positive")

    @property
    def perimeter(self):
        return 4.0 * self.half_width + 2.0 * math.pi * self.radius

    @property
    def reference_point(self):
        return (self.half_width + self.radius, 0.0)

    def segment(self, x):
        """Index 0..3 of the boundary piece containing arclength ``x``."""
        return boundary_point(self, x)[-1]


@dataclass(frozen=True)
class BilliardState:
    x: float
    theta: float


def boundary_point(geom, x):
    """``(px, py, tx, ty, nx, ny, segment)`` at arclength ``x``.

    ``(tx, ty)`` is the unit counter-clockwise tangent and ``(nx, ny)`` the
    inward normal.
    """
    if not 0.0 <= x < geom.perimeter:
        raise DomainError(f"arclength {x} outside [0, {geom.perimeter})")
    return _backend.fallback._boundary_frame(geom.half_width, geom.radius, x)


def arclength_of(geom, px, py):
    """Arclength of a boundary point given in Cartesian coordinates."""
    w, r = geom.half_width, geom.radius
    q = math.pi * r / 2.0
    if px > w:
        phi = math.atan2(py, px - w)
        return r * phi if phi >= 0.0 else geom.perimeter + r * phi
    if px < -w:
        phi = math.atan2(py, px + w)
        if phi < 0.0:
            phi += 2.0 * math.pi
        return q + 2.0 * w + r * (phi - math.pi / 2.0)
    if py > 0.0:
        return q + (w - px)
    s = 3.0 * q + 2.0 * w + (px + w)
    return 0.0 if s >= geom.perimeter else s


def collide(geom, state):
    """Follow the ray leaving ``state`` to the next boundary collision."""
    if not 0.0 < state.theta < math.pi:
        raise DomainError(f"theta={state.theta} must lie in (0, pi)")
    s, th, ok = _backend.kernels.stadium_collide(
        geom.half_width, geom.radius, float(state.x), float(state.theta))
    if not ok:
        raise GrazingOrbitError(
            f"no forward intersection from x={state.x}, theta={state.theta}",
            value=state.theta)
    return BilliardState(s, th)


def reverse(geom, state):
    """Time reversal ``(x, theta) -> (x, pi - theta)``."""
    return BilliardState(state.x, math.pi - state.theta)


def perturb_theta(theta_old, eps, u):
    """Draw from the uniform law on ``[max(0, t - eps), min(pi, t + eps)]``.

    ``u`` in ``[0, 1)`` is the uniform variate; the map is affine in it.
    """
    if not 0.0 <= theta_old <= math.pi:
        raise ParameterError(f"theta_old={theta_old} outside [0, pi]")
    if not 0.0 < eps < math.pi / 2.0:
        raise ParameterError(f"eps={eps} outside (0, pi/2)")
    if not 0.0 <= u < 1.0:
        raise ParameterError(f"u={u} outside [0, 1)")
    return _backend.kernels.perturb(theta_old, eps, u)
