"""Dominant eigenpair and second-eigenvalue estimate of a density operator.

An operator here is anything callable on node values that also exposes the
``grid`` it acts on (transfer, averaging and noisy operators all qualify).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError, ParameterError
from .grid import DensityVector, integrate

__all__ = [
    "EigenResult",
    "GapEstimate",
    "dominant_eigenpair",
    "spectral_gap",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50_000
STRATEGIES = ("power", "krylov", "direct", "auto")
# shift used by inverse iteration; the dominant eigenvalue sits within about
# 1e-7 of 1 for every discretisation in the package
DIRECT_SHIFT = 1.0 + 1e-6
# power-iteration budget tried by the "auto" strategy before a direct solve
AUTO_POWER_BUDGET = 3000


@dataclass(frozen=True)
class EigenResult:
    eigenvalue: float
    density: DensityVector
    iterations: int
    residual: float


@dataclass(frozen=True)
class GapEstimate:
    second_modulus: float
    iterations: int

    @property
    def gap(self):
        return 1.0 - self.second_modulus


def _l1(values, grid):
    return integrate(np.abs(values), grid)


def _residual(op, q, grid):
    """``(lambda, ||op q - lambda q||_1)`` for a unit-mass ``q``."""
    y = op(q)
    lam = integrate(y, grid) / integrate(q, grid)
    return lam, _l1(y - lam * q, grid), y


def dominant_eigenpair(op, init=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                       strategy="power"):
    """Eigenpair of ``op`` with the largest eigenvalue.

    ``strategy="power"`` iterates ``q <- op(q) / mass`` until the L1
    residual ``||op(q) - lambda q||_1`` drops below ``tol``.
    ``strategy="krylov"`` asks ARPACK for the eigenvector and then polishes
    it with power steps.  ``strategy="direct"`` runs inverse iteration with
    an LU factorisation of ``op.matrix()`` shifted just above 1; it is the
    one that copes with nearly gapless operators such as the intermittent
    map.  ``strategy="auto"`` tries a short power iteration first and falls
    back to ``direct``.

    Raises :class:`NonConvergenceError` (carrying the last residual) when
    ``max_iter`` operator applications are not enough.
    """
    grid = op.grid
    if tol <= 0.0 or max_iter < 1:
        raise ParameterError("tol must be > 0 and max_iter >= 1")
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown eigen strategy {strategy!r}")
    if init is None:
        q = np.full(grid.n, 1.0 / grid.length)
    else:
        if not init.grid.same_as(grid):
            raise ParameterError("init lives on a different grid")
        q = np.array(init.values, dtype=float)
    if strategy == "auto":
        try:
            return dominant_eigenpair(op, init, tol, min(max_iter, AUTO_POWER_BUDGET))
        except NonConvergenceError:
            return _inverse_iteration(op, q, grid, tol, max_iter)
    if strategy == "direct":
        return _inverse_iteration(op, q, grid, tol, max_iter)
    used = 0
    if strategy == "krylov":
        q, used = _krylov_start(op, q, grid, tol)
    mass = integrate(q, grid)
    if not mass > 0.0:
        raise ParameterError("init must have positive mass")
    q = q / mass
    res = math.inf
    for k in range(1, max_iter - used + 1):
        lam, res, y = _residual(op, q, grid)
        if res <= tol:
            return EigenResult(lam, DensityVector(q, grid), k + used, res)
        m = integrate(y, grid)
        if not (m > 0.0 and math.isfinite(m)):
            raise NonConvergenceError("iterate lost its mass", value=res)
        q = y / m
    raise NonConvergenceError(
        f"no convergence in {max_iter} iterations (residual {res:.3e})", value=res)


def _factorize(op, shift):
    """Solver for ``(shift I - A) x = b``; dense LU when fill would be high."""
    from scipy import sparse
    from scipy.linalg import lu_factor, lu_solve
    from scipy.sparse.linalg import splu

    a = op.matrix()
    n = a.shape[0]
    if a.nnz > 0.02 * n * n:
        lu = lu_factor(shift * np.eye(n) - a.toarray(), check_finite=False)
        return lambda b: lu_solve(lu, b, check_finite=False)
    lu = splu((shift * sparse.identity(n) - a).tocsc())
    return lu.solve


def _inverse_iteration(op, q, grid, tol, max_iter):
    solve = _factorize(op, DIRECT_SHIFT)
    mass = integrate(q, grid)
    if not mass > 0.0:
        raise ParameterError("init must have positive mass")
    q = q / mass
    res = math.inf
    for k in range(1, min(max_iter, 200) + 1):
        y = solve(q)
        m = integrate(y, grid)
        if not (m != 0.0 and math.isfinite(m)):
            raise NonConvergenceError("inverse iteration broke down", value=res)
        q = y / m
        lam, res, _ = _residual(op, q, grid)
        if res <= tol:
            return EigenResult(lam, DensityVector(q, grid), k, res)
    raise NonConvergenceError(
        f"inverse iteration stalled (residual {res:.3e})", value=res)


def _krylov_start(op, q, grid, tol):
    from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

    count = [0]

    def matvec(v):
        count[0] += 1
        return op(np.real(v).ravel())

    lin = LinearOperator((grid.n, grid.n), matvec=matvec, dtype=float)
    try:
        vals, vecs = eigs(lin, k=1, which="LM", v0=q, tol=min(tol, 1e-8) * 1e-2,
                          ncv=min(grid.n - 1, 40))
        v = np.real(vecs[:, 0])
    except ArpackNoConvergence as exc:
        if exc.eigenvectors.shape[1] == 0:
            return q, count[0]
        v = np.real(exc.eigenvectors[:, 0])
    if integrate(v, grid) < 0.0:
        v = -v
    return v, count[0]


def spectral_gap(op, rho0=None, tol=1e-3, max_iter=5000, seed=0, check_every=20):
    """Estimate the second-largest eigenvalue modulus of ``op``.

    Power iteration runs on the mass-zero subspace: after each application
    the component along the invariant density is removed.  Discretised
    transfer operators are far from normal and their leading nontrivial
    eigenvalues usually come as a complex pair, so single-step norm ratios
    oscillate.  The estimate is the geometric mean of the ratios over the
    second half of the run, recomputed every ``check_every`` steps until two
    consecutive values agree to ``tol`` (relative).
    """
    grid = op.grid
    if rho0 is None:
        rho0 = dominant_eigenpair(op).density
    r0 = rho0.values
    rng = np.random.default_rng(seed)
    x = (grid.nodes - grid.lo) / grid.length
    # smooth start with a random mix of low Fourier modes
    v = np.zeros(grid.n)
    for k in range(1, 6):
        a, b = rng.standard_normal(2)
        v += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)

    def project(u):
        return u - integrate(u, grid) * r0

    v = project(v)
    v /= _l1(v, grid)
    logs = []
    estimate = math.nan
    for k in range(1, max_iter + 1):
        v = project(op(v))
        ratio = _l1(v, grid)
        if ratio <= 1e-13:
            # the operator annihilates everything but rho0
            return GapEstimate(ratio, k)
        v /= ratio
        logs.append(math.log(ratio))
        if k % check_every == 0:
            tail = logs[k // 2:]
            new = math.exp(sum(tail) / len(tail))
            if abs(new - estimate) <= tol * new:
                return GapEstimate(min(new, 1.0), k)
            estimate = new
    raise NonConvergenceError(
        f"second-eigenvalue estimate did not settle in {max_iter} iterations",
        value=estimate)
