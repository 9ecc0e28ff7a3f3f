"""Grids, trapezoid quadrature and density vectors.

Every density in the package lives on a :class:`Grid`: an increasing set of
nodes on an interval ``[lo, hi]``, optionally identified into a circle.
Integrals are always trapezoid sums over the piecewise-linear interpolant of
the node values; on a periodic grid the last cell wraps to ``nodes[0] + L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ContractError, DegenerateDensityError, ParameterError,
                     PerronError)

__all__ = [
    "Grid",
    "DensityVector",
    "build_grid",
    "trapezoid_weights",
    "integrate",
    "l1_distance",
    "normalize",
    "BLEND_FRACTION",
    "MIN_NODE_SPACING",
    "DEFAULT_MIN_OFFSET",
    "grading_exponent",
    "OVERSHOOT_TOL",
]

BLEND_FRACTION = 0.1
MIN_NODE_SPACING = 1e-12
# first graded node; closer nodes leave the discrete operator near a neutral
# fixed point so close to the identity that node values become ill-determined
DEFAULT_MIN_OFFSET = 1e-6
# magnitude of negative node values tolerated from high-order interpolation
OVERSHOOT_TOL = 1e-6


class GridConstructionError(PerronError, RuntimeError):
    """Nodes handed to :class:`Grid` are not strictly increasing."""


def trapezoid_weights(nodes, lo, hi, periodic):
    """Per-node trapezoid weights; they sum to ``hi - lo``."""
    x = np.asarray(nodes, dtype=float)
    w = np.empty_like(x)
    if periodic:
        length = hi - lo
        right = np.empty_like(x)
        right[:-1] = x[1:]
        right[-1] = x[0] + length
        left = np.empty_like(x)
        left[1:] = x[:-1]
        left[0] = x[-1] - length
        w[:] = 0.5 * (right - left)
    else:
        w[1:-1] = 0.5 * (x[2:] - x[:-2])
        w[0] = 0.5 * (x[1] - x[0]) + (x[0] - lo)
        w[-1] = 0.5 * (x[-1] - x[-2]) + (hi - x[-1])
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered nodes on ``[lo, hi]`` with trapezoid weights.

    On a periodic grid ``hi`` is identified with ``lo`` and is never stored
    as a node.  On a non-periodic grid the density is taken constant between
    an end node and the interval edge, which is why the end weights pick up
    the gap.
    """

    nodes: np.ndarray
    lo: float
    hi: float
    periodic: bool
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ParameterError("a grid needs at least two nodes")
        if not self.hi > self.lo:
            raise ParameterError(f"empty domain [{self.lo}, {self.hi}]")
        if np.any(np.diff(x) <= 0.0):
            raise GridConstructionError("grid nodes must be strictly increasing")
        if x[0] < self.lo or x[-1] > self.hi:
            raise GridConstructionError("grid nodes outside the domain")
        if self.periodic and x[-1] >= self.hi:
            raise GridConstructionError("periodic grid stores the endpoint twice")
        x.setflags(write=False)
        w = trapezoid_weights(x, self.lo, self.hi, self.periodic)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "periodic", bool(self.periodic))
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.nodes.size

    @property
    def n(self):
        return self.nodes.size

    @property
    def length(self):
        return self.hi - self.lo

    def cell_widths(self):
        """Widths of the cells to the right of each node.

        A periodic grid has ``n`` cells (the last wraps around); a
        non-periodic one has ``n - 1``.
        """
        x = self.nodes
        if self.periodic:
            return np.diff(np.append(x, x[0] + self.length))
        return np.diff(x)

    def same_as(self, other):
        if self is other:
            return True
        return (isinstance(other, Grid)
                and self.periodic == other.periodic
                and self.lo == other.lo and self.hi == other.hi
                and np.array_equal(self.nodes, other.nodes))

    def reduce(self, x):
        """Map coordinates into ``[lo, hi)`` on a periodic grid."""
        x = np.asarray(x, dtype=float)
        if not self.periodic:
            return x
        r = self.lo + np.mod(x - self.lo, self.length)
        return np.where(r >= self.hi, self.lo, r)


def integrate(values, grid):
    """Trapezoid integral of node values over the grid."""
    return float(np.dot(grid.weights, values))


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Node values of a density (probability per unit length)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ContractError(
                f"{v.size} values for a grid of {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ParameterError("density values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mass(self):
        return integrate(self.values, self.grid)

    @property
    def min_value(self):
        return float(self.values.min())

    def overshoot_flagged(self, tol=OVERSHOOT_TOL):
        """True when a node value is more negative than ``-tol``."""
        return self.min_value < -tol

    @classmethod
    def from_function(cls, func, grid):
        return cls(np.asarray(func(grid.nodes), dtype=float), grid)

    @classmethod
    def uniform(cls, grid):
        return cls(np.full(grid.n, 1.0 / grid.length), grid)


def _check_shared(a, b):
    if not a.grid.same_as(b.grid):
        raise ContractError("densities live on different grids")


def l1_distance(a, b):
    """Trapezoid-rule L1 distance between two densities on one grid."""
    _check_shared(a, b)
    return integrate(np.abs(a.values - b.values), a.grid)


def normalize(rho):
    """Return a copy of ``rho`` scaled to unit trapezoid mass."""
    m = rho.mass
    if not m > 0.0:
        raise DegenerateDensityError(f"cannot normalize a density of mass {m}")
    return DensityVector(rho.values / m, rho.grid)


def _graded_nodes(n_graded, lo, blend_width, x_min):
    """Power-law graded nodes ``lo + b (j/J)^q``, ``j = 1..J-1``.

    ``J = n_graded + 1`` so that ``j = J`` lands on the blend point, and ``q``
    is fixed by placing the first node at ``lo + x_min``.
    """
    J = n_graded + 1
    q = math.log(blend_width / x_min) / math.log(J)
    j = np.arange(1, J, dtype=float)
    return lo + blend_width * (j / J) ** q, q


def build_grid(kind, n, domain=(0.0, 1.0), periodic=True, alpha=None, *,
               blend=BLEND_FRACTION, offset=0.0, graded_fraction=0.25,
               min_offset=None, upper_fraction=0.1, upper_blend=0.05):
    """Build a uniform or power-law graded grid.

    Parameters
    ----------
    kind : {"uniform", "graded"}
    n : int
        Total node count (at least 16 for graded grids, 2 for uniform).
    domain : (float, float)
    periodic : bool
    alpha : float, optional
        Singularity exponent in (0, 1) of a density ``~ (x - lo)^-alpha``;
        required for ``kind="graded"``.
    blend : float
        Fraction of the domain covered by the graded region.
    offset : float
        Uniform grids only: shift every node by this fraction of a cell.
        ``0.5`` keeps nodes off the cell edges ``lo + k h``.
    graded_fraction : float
        Fraction of the ``n`` nodes placed inside the graded region.
    min_offset : float, optional
        Distance of the first graded node from ``lo`` (default
        ``DEFAULT_MIN_OFFSET``).
    upper_fraction, upper_blend : float
        Periodic graded grids only.  A fraction of the nodes is packed
        quadratically towards ``hi`` over the last ``upper_blend`` of the
        domain.  Across the wrap-around point the singular region begins
        again, so narrow windows that straddle ``hi`` need fine cells on
        that side as well.  ``upper_fraction=0`` disables the cluster.

    Notes
    -----
    The graded region ``(lo, lo + blend*L)`` carries nodes
    ``lo + b (j/J)^q``; ``q`` is fixed by the first node.  The remaining
    nodes are equispaced from the blend point onwards.  On a periodic grid
    the last node sits within ``min_offset`` of ``hi`` (or closer, with the
    upper cluster), so the cell that wraps across the singular point stays
    thin.  The lower edge itself is never a node of a graded grid.
    """
    lo, hi = map(float, domain)
    length = hi - lo
    if kind == "uniform":
        if n < 2:
            raise ParameterError(f"a uniform grid needs n >= 2 nodes, got {n}")
        h = length / (n if periodic else n - 1)
        nodes = lo + (np.arange(n) + offset) * h
        if not periodic and offset == 0.0:
            nodes[-1] = hi
        return Grid(nodes, lo, hi, periodic)
    if kind != "graded":
        raise ParameterError(f"unknown grid kind {kind!r}")
    if n < 16:
        raise ParameterError(f"a graded grid needs n >= 16 nodes, got {n}")
    if alpha is None:
        raise ParameterError("graded grids require alpha")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if min_offset is None:
        min_offset = DEFAULT_MIN_OFFSET
    min_offset = max(min_offset, MIN_NODE_SPACING)
    b = blend * length
    n_graded = int(round(graded_fraction * n))
    n_upper = int(round(upper_fraction * n)) if periodic else 0
    n_uniform = n - n_graded - n_upper
    if n_graded < 2 or n_uniform < 2 or (n_upper and n_upper < 2):
        raise ParameterError("node fractions leave too few nodes in a region")
    graded, _ = _graded_nodes(n_graded, lo, b, min_offset)
    if n_upper:
        ub = upper_blend * length
        uniform = np.linspace(lo + b, hi - ub, n_uniform, endpoint=False)
        j = np.arange(n_upper, 0, -1, dtype=float)
        upper = hi - ub * (j / n_upper) ** 2
        parts = [graded, uniform, upper]
    else:
        # on a circle the last node mirrors the first one
        top = hi - min_offset if periodic else hi
        parts = [graded, np.linspace(lo + b, top, n_uniform)]
    return Grid(np.concatenate(parts), lo, hi, periodic)


def grading_exponent(n, *, blend=BLEND_FRACTION, graded_fraction=0.25,
                     min_offset=None, length=1.0):
    """Exponent ``q`` used by :func:`build_grid` for a graded grid."""
    if min_offset is None:
        min_offset = DEFAULT_MIN_OFFSET
    n_graded = int(round(graded_fraction * n))
    return math.log(blend * length / min_offset) / math.log(n_graded + 1)
