"""Ergodic-average estimators and their statistical errors.

Two estimators live here:

* visit histograms of noisy 1-D orbits, compared bin by bin to give
  ``Phi(eps) = sum_i |p_i(eps) - p_i(0)|``;
* the stadium observable ``Phi(eps) = |<phi_eps>_orbit - int phi_eps rho_0|``
  built from signed indicator sets of whispering-gallery and bouncing-ball
  states.

Random numbers come from ``numpy.random.Generator`` streams spawned from one
``SeedSequence`` per run, one stream per chain, so results depend only on
``(seed, chains)`` and not on the kernel backend.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .billiard import StadiumGeometry
from .errors import (ContractError, DegenerateSeriesError, InsufficientDataError,
                     InvariantViolationError, ParameterError)

__all__ = [
    "Histogram",
    "ObservableEstimate",
    "StadiumObservable",
    "histogram_invariant",
    "l1_from_histograms",
    "histogram_std",
    "histogram_density",
    "autocorrelation_time",
    "AutocovarianceAccumulator",
    "stadium_phi",
    "stadium_reference",
    "stadium_orbit_histograms",
    "DEFAULT_BURN_IN",
    "DYADIC_JITTER",
    "LowSignalWarning",
]

DEFAULT_BURN_IN = 10_000
# Binary-shift maps lose one mantissa bit per step, so a noiseless floating
# point orbit collapses onto 0 within ~60 steps.  A noise floor this small
# keeps the orbit alive without visibly changing its statistics.
DYADIC_JITTER = 1e-12
BLOCK = 1 << 20
TAU_WINDOW = 5.0
TAU_FLOOR = 0.5
MIN_SERIES = 1000
REFERENCE_SAMPLES = 1 << 23
REFERENCE_REPLICATES = 8


class LowSignalWarning(UserWarning):
    """An estimate is not distinguishable from its own statistical error."""


# --- histograms --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Histogram:
    """Visit counts of one or more orbits on ``bins`` equal intervals."""

    counts: np.ndarray = field(repr=False)
    lo: float
    hi: float
    steps: int
    seed: int
    eps: float = 0.0

    @property
    def bins(self):
        return self.counts.size

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def centers(self):
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def p_hat(self):
        return self.counts / self.steps

    def same_partition(self, other):
        return (self.bins == other.bins and self.lo == other.lo
                and self.hi == other.hi)


def _chain_streams(seed, chains):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(chains)]


def histogram_invariant(m, kernel, bins, steps, burn_in=DEFAULT_BURN_IN, seed=0,
                        chains=1, block=BLOCK):
    """Histogram of ``chains`` independent noisy orbits of ``m``.

    Each chain starts from a uniform point, discards ``burn_in`` steps and
    then records ``steps // chains`` visits.  ``kernel.eps = 0`` on a
    binary-shift map is run with noise ``DYADIC_JITTER`` instead.
    """
    if bins < 1 or steps < chains or chains < 1:
        raise ParameterError("need bins >= 1 and steps >= chains >= 1")
    if kernel.shape == "theta-truncated":
        raise ParameterError("the angle kernel only applies to the stadium")
    lo, hi = m.domain
    eps = kernel.eps
    if eps == 0.0 and m.dyadic:
        eps = DYADIC_JITTER
    if not m.periodic and eps > 0.1:
        raise ParameterError("noise above 0.1 lets quadratic orbits escape")
    per_chain = steps // chains
    rngs = _chain_streams(seed, chains)
    x = np.array([lo + (hi - lo) * r.random() for r in rngs])
    if not m.periodic:
        x = 0.5 * x  # start well inside the invariant interval
    counts = np.zeros(bins, dtype=np.int64)
    k = _backend.kernels
    args = (m.kernel_code, m.kernel_param, kernel.noise_code, eps, m.periodic,
            float(lo), float(hi))
    for phase, total in (("burn-in", burn_in), ("run", per_chain)):
        target = counts if phase == "run" else np.zeros(bins, dtype=np.int64)
        done = 0
        while done < total:
            n = min(block, total - done)
            u = np.stack([r.random(n) for r in rngs])
            escaped, x = k.chain_histogram(*args, x, u, target)
            if escaped:
                raise InvariantViolationError(
                    f"{m.id} orbit left [{lo}, {hi}] at eps={kernel.eps}")
            done += n
    return Histogram(counts, float(lo), float(hi), per_chain * chains, seed, kernel.eps)


def l1_from_histograms(h_eps, h_0):
    """``sum_i |p_i(eps) - p_i(0)|`` on a shared partition."""
    if not h_eps.same_partition(h_0):
        raise ContractError("histograms use different partitions")
    return float(np.abs(h_eps.p_hat - h_0.p_hat).sum())


def histogram_std(h):
    """Per-bin standard deviations ``sqrt(p_i / M)`` and the bound ``sqrt(N / M)``."""
    return np.sqrt(h.p_hat / h.steps), math.sqrt(h.bins / h.steps)


def histogram_density(h):
    """Density values (probability per unit length) at the bin centres."""
    return h.p_hat * h.bins / (h.hi - h.lo)


# --- autocorrelation ---------------------------------------------------------

class AutocovarianceAccumulator:
    """Autocovariance up to ``max_lag`` accumulated over independent blocks.

    Only pairs inside one block are used, so blocks from separate chains
    can be mixed freely.  Lagged products are computed with zero-padded
    FFTs.
    """

    def __init__(self, max_lag):
        self.max_lag = int(max_lag)
        self.products = np.zeros(self.max_lag + 1)
        self.pairs = np.zeros(self.max_lag + 1)
        self.total = 0.0
        self.total_sq = 0.0
        self.count = 0
        # sums are kept about the first value seen to avoid cancellation
        self.shift = None

    def add(self, block):
        x = np.asarray(block, dtype=float)
        n = x.size
        if n == 0:
            return
        if self.shift is None:
            self.shift = float(x[0])
        x = x - self.shift
        lag = min(self.max_lag, n - 1)
        size = 1 << int(math.ceil(math.log2(n + lag + 1)))
        f = np.fft.rfft(x, size)
        acf = np.fft.irfft(f * np.conj(f), size)[:lag + 1]
        self.products[:lag + 1] += acf
        self.pairs[:lag + 1] += n - np.arange(lag + 1)
        self.total += float(x.sum())
        self.total_sq += float(np.dot(x, x))
        self.count += n

    @property
    def mean(self):
        return self.total / self.count + self.shift

    @property
    def variance(self):
        return self.total_sq / self.count - (self.total / self.count) ** 2

    def autocovariance(self):
        used = self.pairs > 0
        return self.products[used] / self.pairs[used] - (self.total / self.count) ** 2

    def tau(self):
        """``sum_{n >= 0} C(n) / C(0)`` with the adaptive window."""
        if self.count < 2:
            raise InsufficientDataError("no data accumulated")
        c = self.autocovariance()
        if not c[0] > 1e-300 or self.variance <= 0.0:
            raise DegenerateSeriesError("series has zero variance")
        rho = c / c[0]
        run = np.cumsum(rho)
        lags = np.arange(rho.size)
        stop = np.flatnonzero(lags >= TAU_WINDOW * run)
        # without a stopping lag inside the stored range the window is capped
        k = stop[0] if stop.size else rho.size - 1
        return max(float(run[k]), TAU_FLOOR)


def autocorrelation_time(series, max_lag=None):
    """Integrated autocorrelation time of a scalar series.

    ``tau = sum_{n >= 0} C(n) / C(0)`` truncated at the first lag that
    exceeds five times the running sum, never below ``0.5``.
    """
    x = np.asarray(series, dtype=float)
    if x.size < MIN_SERIES:
        raise InsufficientDataError(f"need at least {MIN_SERIES} samples, got {x.size}")
    acc = AutocovarianceAccumulator(max_lag or min(x.size - 1, 1 << 16))
    acc.add(x)
    return acc.tau()


# --- stadium -----------------------------------------------------------------

@dataclass(frozen=True)
class StadiumObservable:
    """Signed indicator ``phi_eps`` of whispering-gallery and bouncing-ball states.

    ``phi = +1`` on states whose ``depth``-step backward orbit meets the
    grazing strips over the flat edges, ``-1`` on states meeting the
    near-normal strip, ``0`` otherwise or when both are met.  ``constant``
    replaces the construction by a fixed value (used as a control).
    """

    eps: float
    depth: int = 4
    constant: int | None = None

    def __post_init__(self):
        if self.depth < 0:
            raise ParameterError("depth must be >= 0")

    def __call__(self, geom, x, theta):
        if self.constant is not None:
            return self.constant
        return int(_backend.kernels.stadium_phi(
            geom.half_width, geom.radius, float(x), float(theta), self.eps, self.depth))


@dataclass(frozen=True)
class ObservableEstimate:
    value: float
    std_error: float
    tau_corr: float
    steps: int
    variance: float
    orbit_mean: float = 0.0
    reference: float = 0.0
    reference_error: float = 0.0
    low_signal: bool = False


def _sample_rho0(geom, rng, n):
    """States drawn from ``rho_0 ~ sin(theta)``: uniform x, ``cos theta`` uniform."""
    x = rng.random(n) * geom.perimeter
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    return x, theta


def stadium_reference(geom, obs, samples=REFERENCE_SAMPLES, seed=0, block=BLOCK):
    """Quadrature of ``int phi rho_0`` and its standard error.

    The integrand is evaluated on scrambled Sobol points in ``(x, cos theta)``
    (under which ``rho_0`` is uniform), split into ``REFERENCE_REPLICATES``
    independently scrambled point sets; the error is the standard error of
    the replicate means.  ``samples`` is rounded up to a power of two per
    replicate.
    """
    from scipy.stats import qmc

    if obs.constant is not None:
        return float(obs.constant), 0.0
    if samples < REFERENCE_REPLICATES:
        raise ParameterError(f"need at least {REFERENCE_REPLICATES} reference samples")
    per = samples // REFERENCE_REPLICATES
    m = max(int(math.ceil(math.log2(per))), 1)
    k = _backend.kernels
    means = []
    for sub in np.random.SeedSequence([seed, 0x5eed]).spawn(REFERENCE_REPLICATES):
        sobol = qmc.Sobol(2, scramble=True, seed=np.random.default_rng(sub))
        total = 0
        left = 1 << m
        while left:
            n = min(block, left)
            p = sobol.random(n)
            x = p[:, 0] * geom.perimeter
            th = np.arccos(1.0 - 2.0 * p[:, 1])
            out = np.empty(n, dtype=np.int8)
            k.stadium_phi_batch(geom.half_width, geom.radius, x, th, obs.eps,
                                obs.depth, out)
            total += int(out.sum(dtype=np.int64))
            left -= n
        means.append(total / (1 << m))
    means = np.array(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


def stadium_phi(geom, obs, eps, steps, burn_in=DEFAULT_BURN_IN, seed=0, chunks=1,
                reference_samples=REFERENCE_SAMPLES, max_lag=1 << 16, block=BLOCK):
    """Estimate ``Phi(eps)`` along an ``eps``-noisy stadium orbit.

    The orbit average of ``phi_eps`` is compared with ``int phi_eps rho_0``,
    computed by :func:`stadium_reference` with ``reference_samples`` points.
    The orbit is split into ``chunks`` independently seeded pieces of equal
    length.  ``std_error`` combines
    ``sqrt(2 var tau / M)`` for the orbit with the sampling error of the
    reference.
    """
    if obs.eps != eps:
        raise ParameterError("observable and noise amplitudes differ")
    if not 0.0 <= eps < math.pi / 2.0:
        raise ParameterError(f"eps={eps} outside [0, pi/2)")
    if steps < chunks or chunks < 1:
        raise ParameterError("need steps >= chunks >= 1")
    geom = geom or StadiumGeometry()
    per_chunk = steps // chunks
    total_steps = per_chunk * chunks
    ref, ref_err = stadium_reference(geom, obs, reference_samples, seed)
    if obs.constant is not None:
        return ObservableEstimate(0.0, 0.0, TAU_FLOOR, total_steps, 0.0,
                                  float(obs.constant), ref, 0.0, False)
    k = _backend.kernels
    acc = AutocovarianceAccumulator(max_lag)
    for rng in _chain_streams(seed, chunks):
        x0, th0 = _sample_rho0(geom, rng, 1)
        s, th = float(x0[0]), float(th0[0])
        for phase, total in (("burn-in", burn_in), ("run", per_chunk)):
            done = 0
            while done < total:
                n = min(block, total - done)
                u = rng.random(n)
                out = np.empty(n, dtype=np.int8)
                s, th = k.stadium_run(geom.half_width, geom.radius, s, th, eps,
                                      obs.depth, u, out)
                if phase == "run":
                    acc.add(out)
                done += n
    mean = acc.mean
    var = max(acc.variance, 0.0)
    try:
        tau = acc.tau()
    except DegenerateSeriesError:
        tau = TAU_FLOOR
    orbit_err = math.sqrt(2.0 * var * tau / total_steps)
    err = math.hypot(orbit_err, ref_err)
    value = abs(mean - ref)
    low = value <= 2.0 * err
    if low and eps > 0.0:
        warnings.warn(f"Phi({eps}) = {value:.3g} is within 2 std errors of 0",
                      LowSignalWarning, stacklevel=2)
    return ObservableEstimate(value, err, tau, total_steps, var, mean, ref,
                              ref_err, low)


def stadium_orbit_histograms(geom, steps, bins=64, seed=0, eps=0.0,
                             burn_in=DEFAULT_BURN_IN, block=BLOCK):
    """Visit counts of ``theta`` on ``[0, pi]`` and of ``x`` on ``[0, L)``."""
    rng = np.random.default_rng(seed)
    x0, th0 = _sample_rho0(geom, rng, 1)
    s, th = float(x0[0]), float(th0[0])
    th_counts = np.zeros(bins, dtype=np.int64)
    x_counts = np.zeros(bins, dtype=np.int64)
    k = _backend.kernels
    for phase, total in (("burn-in", burn_in), ("run", steps)):
        done = 0
        while done < total:
            n = min(block, total - done)
            u = rng.random(n)
            s_out = np.empty(n)
            th_out = np.empty(n)
            s, th = k.stadium_orbit(geom.half_width, geom.radius, s, th, eps, u,
                                    s_out, th_out)
            if phase == "run":
                th_counts += np.histogram(th_out, bins, (0.0, math.pi))[0]
                x_counts += np.histogram(s_out, bins, (0.0, geom.perimeter))[0]
            done += n
    return th_counts, x_counts
