"""Discretised transfer, averaging and noisy transfer operators.

All three operators are applied matrix-free.  The transfer operator is a
table of interpolation stencils: for every node ``x_i`` and inverse branch
``phi_j`` it stores the Lagrange weights (already divided by
``|f'(phi_j(x_i))|``) of the stencil nodes closest to ``phi_j(x_i)``.
Stencils never reach across a discontinuity of the map; near one they are
shifted sideways and become one-sided.

The averaging operator integrates the piecewise-linear interpolant of the
density over the noise window of every node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (ContractError, ExtrapolationError, KernelWidthError,
                     ParameterError, UnsupportedMapError)
from .grid import DensityVector, l1_distance

__all__ = [
    "NoiseKernel",
    "TransferOperator",
    "AveragingOperator",
    "NoisyOperator",
    "transfer_operator",
    "averaging_operator",
    "apply_transfer",
    "apply_averaging",
    "apply_noisy",
    "heuristic_deviation",
    "averaging_deviation",
    "default_stencil_width",
    "lagrange_weights",
]

KERNEL_SHAPES = ("symmetric-uniform", "one-sided-uniform", "theta-truncated")


@dataclass(frozen=True)
class NoiseKernel:
    """Noise density ``g`` at amplitude ``eps``.

    ``symmetric-uniform``: ``xi`` uniform on ``[-1, 1]``.
    ``one-sided-uniform``: ``xi`` uniform on ``[-1, 0]``.
    ``theta-truncated``: the billiard angle kernel, uniform on
    ``[max(0, t - eps), min(pi, t + eps)]`` around the old angle ``t``.
    """

    shape: str
    eps: float

    def __post_init__(self):
        if self.shape not in KERNEL_SHAPES:
            raise ParameterError(f"unknown kernel shape {self.shape!r}")
        if not (self.eps >= 0.0 and math.isfinite(self.eps)):
            raise ParameterError(f"eps must be finite and >= 0, got {self.eps}")

    @property
    def noise_code(self):
        return 1 if self.shape == "one-sided-uniform" else 0

    def density(self, xi):
        """Unscaled density ``g(xi)`` of the normalised draw."""
        xi = np.asarray(xi, dtype=float)
        if self.shape == "symmetric-uniform":
            return np.where(np.abs(xi) <= 1.0, 0.5, 0.0)
        if self.shape == "one-sided-uniform":
            return np.where((xi >= -1.0) & (xi <= 0.0), 1.0, 0.0)
        raise ParameterError("the theta kernel depends on the old angle; "
                             "use theta_density")

    def theta_density(self, theta_old, theta_new):
        """Transition density ``g_eps(theta_old -> theta_new)`` of the angle kernel."""
        lo = max(0.0, theta_old - self.eps)
        hi = min(math.pi, theta_old + self.eps)
        theta_new = np.asarray(theta_new, dtype=float)
        return np.where((theta_new >= lo) & (theta_new <= hi), 1.0 / (hi - lo), 0.0)

    def window(self):
        """Offsets ``(lo, hi)`` such that ``(G q)(x)`` averages ``q`` over
        ``[x + lo, x + hi]``."""
        if self.shape == "symmetric-uniform":
            return -self.eps, self.eps
        if self.shape == "one-sided-uniform":
            # x_next = f(x) + eps*xi with xi <= 0: mass at x came from [x, x+eps]
            return 0.0, self.eps
        raise ParameterError("the theta kernel has no fixed window")


def default_stencil_width(m):
    return 4 if m.id == "piecewise" else 6


def lagrange_weights(y, z):
    """Lagrange basis weights at points ``y`` for stencil rows ``z``.

    ``y`` has shape ``(n,)``, ``z`` shape ``(n, w)``; returns ``(n, w)``.
    """
    n, w = z.shape
    out = np.ones((n, w))
    for j in range(w):
        for m in range(w):
            if m != j:
                out[:, j] *= (y - z[:, m]) / (z[:, j] - z[:, m])
    return out


def _segment_ranges(m, grid):
    """Node index range ``[i0, i1)`` of every segment of the map.

    A node sitting exactly on a discontinuity carries the right-hand limit
    and belongs to the segment that starts there.
    """
    x = grid.nodes
    out = []
    for lo, hi in m.segments:
        i0 = int(np.searchsorted(x, lo, side="left"))
        i1 = int(np.searchsorted(x, hi, side="left"))
        out.append((i0, i1))
    return out


def _stencils(grid, y, segment, wraps, width):
    """Stencil node indices and Lagrange weights for points ``y``."""
    x = grid.nodes
    n = x.size
    k = np.searchsorted(x, y, side="right")
    start = k - width // 2
    offs = np.arange(width)
    if wraps:
        s = start[:, None] + offs[None, :]
        idx = np.mod(s, n)
        z = x[idx] + grid.length * np.floor_divide(s, n)
    else:
        i0, i1 = segment
        if i1 - i0 < width:
            raise ParameterError(
                f"segment holds {i1 - i0} nodes, fewer than the stencil width {width}")
        start = np.clip(start, i0, i1 - width)
        idx = start[:, None] + offs[None, :]
        z = x[idx]
    return idx, lagrange_weights(y, z)


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Discretised Perron-Frobenius operator of a map on a grid."""

    map: object
    grid: object
    stencil_width: int
    idx: np.ndarray = field(repr=False)
    wts: np.ndarray = field(repr=False)
    preimage: np.ndarray = field(repr=False)
    dfabs: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def __call__(self, values):
        out = np.empty(self.grid.n)
        return _backend.kernels.stencil_apply(self.idx, self.wts, values, out)

    def matrix(self):
        """The operator as a ``scipy.sparse`` CSR matrix."""
        from scipy import sparse

        n, w = self.idx.shape
        rows = np.repeat(np.arange(n), w)
        return sparse.csr_matrix((self.wts.ravel(), (rows, self.idx.ravel())),
                                 shape=(n, n))


def transfer_operator(m, grid, stencil_width=None):
    """Build the stencil table of ``m`` on ``grid``."""
    if not m.supports_inverse:
        raise UnsupportedMapError(
            f"{m.id}: operator discretisation is not supported; "
            "use the histogram estimator")
    if grid.periodic != m.periodic or (grid.lo, grid.hi) != tuple(m.domain):
        raise ContractError("grid and map domains differ")
    width = stencil_width or default_stencil_width(m)
    if width < 2:
        raise ParameterError("stencil width must be at least 2")
    y, dfabs, valid = m.preimages(grid.nodes)
    ranges = _segment_ranges(m, grid)
    n, nb = y.shape
    idx = np.zeros((n, nb * width), dtype=np.int64)
    wts = np.zeros((n, nb * width))
    single_wrap = grid.periodic and len(m.segments) == 1 and not m.discontinuities
    for j in range(nb):
        seg = m.branch_segment[j]
        rows = np.flatnonzero(valid[:, j])
        yj = y[rows, j]
        if not grid.periodic:
            if np.any((yj < grid.nodes[0]) | (yj > grid.nodes[-1])):
                raise ExtrapolationError("preimage outside the grid hull")
        sidx, sw = _stencils(grid, yj, ranges[seg], single_wrap, width)
        cols = slice(j * width, (j + 1) * width)
        idx[rows, cols] = sidx
        wts[rows, cols] = sw / dfabs[rows, j][:, None]
    for a in (idx, wts, y, dfabs, valid):
        a.setflags(write=False)
    return TransferOperator(m, grid, width, idx, wts, y, dfabs, valid)


@dataclass(frozen=True, eq=False)
class AveragingOperator:
    """Window-average discretisation of the noise operator on a grid."""

    kernel: NoiseKernel
    grid: object
    idx: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)
    k_lo: np.ndarray = field(repr=False)
    k_hi: np.ndarray = field(repr=False)
    scale: float = 1.0

    @property
    def identity(self):
        return self.kernel.eps == 0.0

    def __call__(self, values):
        if self.identity:
            return np.array(values, dtype=float)
        out = np.empty(self.grid.n)
        _backend.kernels.window_apply(values, self.grid.cell_widths(),
                                      self.grid.periodic, self.idx, self.coef,
                                      self.k_lo, self.k_hi, out)
        out *= self.scale
        return out

    def matrix(self):
        """The operator as a ``scipy.sparse`` CSR matrix."""
        from scipy import sparse

        n = self.grid.n
        if self.identity:
            return sparse.identity(n, format="csr")
        h = self.grid.cell_widths()
        ncell = h.size
        rows = [np.repeat(np.arange(n), 4)]
        cols = [self.idx.ravel()]
        vals = [self.coef.ravel()]
        # every whole cell inside a window adds h/2 to both of its nodes
        counts = np.maximum(self.k_hi - self.k_lo, 0)
        r = np.repeat(np.arange(n), counts)
        start = np.repeat(self.k_lo, counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        cells = np.mod(start + offs, ncell)
        right = np.mod(cells + 1, n) if self.grid.periodic else cells + 1
        rows += [r, r]
        cols += [cells, right]
        vals += [0.5 * h[cells], 0.5 * h[cells]]
        m = sparse.csr_matrix((np.concatenate(vals),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n, n))
        return m * self.scale


def _locate(grid, p):
    """Unwrapped cell number, local coordinate in [0, 1] and width."""
    x = grid.nodes
    n = x.size
    widths = grid.cell_widths()
    if grid.periodic:
        wrap = np.floor((p - x[0]) / grid.length)
        pr = p - wrap * grid.length
        k = np.searchsorted(x, pr, side="right") - 1
        k = np.clip(k, 0, n - 1)
        h = widths[k]
        t = np.clip((pr - x[k]) / h, 0.0, 1.0)
        return wrap.astype(np.int64) * n + k, t, h
    pc = np.clip(p, x[0], x[-1])
    k = np.clip(np.searchsorted(x, pc, side="right") - 1, 0, n - 2)
    h = widths[k]
    t = np.clip((pc - x[k]) / h, 0.0, 1.0)
    return k.astype(np.int64), t, h


def averaging_operator(kernel, grid):
    """Precompute window-edge coefficients for ``kernel`` on ``grid``."""
    n = grid.n
    idx = np.zeros((n, 4), dtype=np.int64)
    coef = np.zeros((n, 4))
    k_lo = np.zeros(n, dtype=np.int64)
    k_hi = np.zeros(n, dtype=np.int64)
    if kernel.eps == 0.0:
        return AveragingOperator(kernel, grid, idx, coef, k_lo, k_hi, 1.0)
    lo_off, hi_off = kernel.window()
    if not grid.periodic and kernel.eps > 0.5 * grid.length:
        raise KernelWidthError(
            f"eps={kernel.eps} exceeds half of the non-periodic domain")
    width = hi_off - lo_off
    if grid.periodic and width > grid.length:
        raise KernelWidthError("noise window longer than the circle")
    x = grid.nodes
    Ka, ta, ha = _locate(grid, x + lo_off)
    Kb, tb, hb = _locate(grid, x + hi_off)
    ka = np.mod(Ka, n) if grid.periodic else Ka
    kb = np.mod(Kb, n) if grid.periodic else Kb
    nxt = (lambda k: np.mod(k + 1, n)) if grid.periodic else (lambda k: k + 1)
    same = Ka == Kb
    dt = tb - ta
    # window inside one cell: integral of the linear piece from ta to tb
    c0_same = ha * dt * (1.0 - 0.5 * (ta + tb))
    c1_same = ha * dt * (0.5 * (ta + tb))
    # otherwise: tail of the first cell, whole cells, head of the last cell
    c0 = np.where(same, c0_same, 0.5 * ha * (1.0 - ta) ** 2)
    c1 = np.where(same, c1_same, 0.5 * ha * (1.0 - ta) * (1.0 + ta))
    c2 = np.where(same, 0.0, hb * tb * (1.0 - 0.5 * tb))
    c3 = np.where(same, 0.0, 0.5 * hb * tb * tb)
    idx[:, 0] = ka
    idx[:, 1] = nxt(ka)
    idx[:, 2] = kb
    idx[:, 3] = nxt(kb)
    coef[:, 0], coef[:, 1], coef[:, 2], coef[:, 3] = c0, c1, c2, c3
    k_lo[:] = np.where(same, 0, Ka + 1)
    k_hi[:] = np.where(same, 0, Kb)
    for a in (idx, coef, k_lo, k_hi):
        a.setflags(write=False)
    return AveragingOperator(kernel, grid, idx, coef, k_lo, k_hi, 1.0 / width)


@dataclass(frozen=True, eq=False)
class NoisyOperator:
    """The composition ``G_eps T`` as a callable on node values."""

    transfer: TransferOperator
    averaging: AveragingOperator

    @property
    def grid(self):
        return self.transfer.grid

    def __call__(self, values):
        return self.averaging(self.transfer(values))

    def matrix(self):
        return (self.averaging.matrix() @ self.transfer.matrix()).tocsr()


def _check(op_grid, rho):
    if not op_grid.same_as(rho.grid):
        raise ContractError("density and operator live on different grids")


def apply_transfer(T, rho):
    _check(T.grid, rho)
    return DensityVector(T(rho.values), rho.grid)


def apply_averaging(G, rho):
    _check(G.grid, rho)
    return DensityVector(G(rho.values), rho.grid)


def apply_noisy(T, G, rho):
    _check(T.grid, rho)
    _check(G.grid, rho)
    return DensityVector(G(T(rho.values)), rho.grid)


def heuristic_deviation(T, G, rho0, n=1):
    """``||T_eps^n rho0 - rho0||_1`` with ``T_eps = G T``."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    _check(T.grid, rho0)
    v = rho0.values
    for _ in range(n):
        v = G(T(v))
    return l1_distance(DensityVector(v, rho0.grid), rho0)


def averaging_deviation(G, rho0):
    """``||G_eps rho0 - rho0||_1``, the one-step heuristic with ``T rho0 = rho0``."""
    return l1_distance(apply_averaging(G, rho0), rho0)
