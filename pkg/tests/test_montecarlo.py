import dataclasses
import math
import warnings

import numpy as np
import pytest

from oracles import CartesianStadium, ar1
from perron.billiard import StadiumGeometry
from perron.eigen import dominant_eigenpair
from perron.errors import (ContractError, DegenerateSeriesError,
                           InsufficientDataError, InvariantViolationError,
                           ParameterError)
from perron.grid import build_grid
from perron.maps import MISIUREWICZ_A, forward, make_map
from perron.montecarlo import (Histogram, LowSignalWarning, StadiumObservable,
                               autocorrelation_time, histogram_density,
                               histogram_invariant, histogram_std,
                               l1_from_histograms, stadium_phi,
                               stadium_reference)
from perron.transfer import (NoiseKernel, NoisyOperator, averaging_operator,
                             transfer_operator)

GEOM = StadiumGeometry()
SYM = "symmetric-uniform"


def _hist(counts, lo=0.0, hi=1.0):
    c = np.asarray(counts, dtype=np.int64)
    return Histogram(c, lo, hi, int(c.sum()), 0)


def _bin_masses(density, bins):
    """Probability of each of ``bins`` equal cells under a node density."""
    g = density.grid
    x = np.append(g.nodes, g.hi)
    y = np.append(density.values, density.values[0])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (y[1:] + y[:-1]))])
    # nodes start at h/2 on the offset grid: prepend the wrapped half cell
    x = np.concatenate([[g.lo], x])
    lead = 0.5 * (g.nodes[0] - g.lo) * (y[0] + y[-1])
    cum = np.concatenate([[0.0], cum + lead])
    edges = np.linspace(g.lo, g.hi, bins + 1)
    return np.diff(np.interp(edges, x, cum))


@pytest.fixture(scope="module")
def piecewise_operator():
    g = build_grid("uniform", 5000, offset=0.5)
    T = transfer_operator(make_map("map2"), g)
    return T, dominant_eigenpair(T).density


def _noisy_density(T, eps):
    G = averaging_operator(NoiseKernel(SYM, eps), T.grid)
    return dominant_eigenpair(NoisyOperator(T, G)).density


# --- histograms --------------------------------------------------------------

def test_doubling_map_uniform_histogram():
    m = make_map("map1", a=0.0)
    M, N = 10 ** 7, 64
    h = histogram_invariant(m, NoiseKernel(SYM, 0.0), N, M, seed=4)
    assert h.steps == M and h.p_hat.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.abs(h.p_hat - 1 / N) <= 3 * math.sqrt((1 / N) / M))


def test_quadratic_spikes_at_critical_images():
    m = make_map("map3")
    h = histogram_invariant(m, NoiseKernel(SYM, 0.0), 4096, 10 ** 7, seed=1)
    c = h.counts
    med = np.median(c[c > 0])
    x = 0.0
    for _ in range(3):
        x = forward(m, x)
        k = min(int((x - h.lo) / (h.hi - h.lo) * h.bins), h.bins - 1)
        # the singularity may sit near a bin edge: take the bin on either side
        peak = c[max(k - 1, 0):k + 2].max()
        assert peak == c[max(k - 20, 0):k + 21].max()
        assert peak > 3 * med
    # nothing lies beyond the first image of the critical point
    assert c[int((0.9 - h.lo) / (h.hi - h.lo) * h.bins) + 1:].sum() == 0


def test_misiurewicz_orbit_lands_on_fixed_point():
    m = make_map("map3", a=MISIUREWICZ_A)
    x3 = forward(m, forward(m, forward(m, 0.0)))
    assert forward(m, x3) == pytest.approx(x3, abs=1e-9)


def test_piecewise_histogram_matches_eigensolver(piecewise_operator):
    T, rho0 = piecewise_operator
    N = 64
    h = histogram_invariant(make_map("map2"), NoiseKernel(SYM, 0.0), N, 10 ** 8, seed=9)
    assert np.abs(h.p_hat - _bin_masses(rho0, N)).sum() <= 1.5e-3
    # and against the closed-form 2/3, 4/3 steps
    exact = np.where(h.centers < 0.5, 2 / 3, 4 / 3)
    assert np.abs(histogram_density(h) - exact).sum() / N <= 1.5e-3


def test_l1_examples():
    a = _hist([3, 5, 2])
    assert l1_from_histograms(a, a) == 0.0
    assert l1_from_histograms(_hist([7, 0]), _hist([0, 7])) == 2.0


def test_l1_partition_mismatch():
    with pytest.raises(ContractError):
        l1_from_histograms(_hist([1, 2]), _hist([1, 2, 3]))
    with pytest.raises(ContractError):
        l1_from_histograms(_hist([1, 2]), _hist([1, 2], hi=2.0))


@pytest.mark.slow
def test_piecewise_l1_matches_operator_on_same_bins(piecewise_operator):
    T, rho0 = piecewise_operator
    N, eps = 64, 0.01
    ref = np.abs(_bin_masses(_noisy_density(T, eps), N) - _bin_masses(rho0, N)).sum()
    m = make_map("map2")
    h0 = histogram_invariant(m, NoiseKernel(SYM, 0.0), N, 10 ** 8, seed=1)
    he = histogram_invariant(m, NoiseKernel(SYM, eps), N, 10 ** 8, seed=2)
    assert l1_from_histograms(he, h0) == pytest.approx(ref, rel=0.10)


@pytest.mark.parametrize("eps", [0.01, 0.03, 0.1])
def test_histogram_estimate_bounds_operator_distance(piecewise_operator, eps):
    from perron.grid import l1_distance

    T, rho0 = piecewise_operator
    true = l1_distance(_noisy_density(T, eps), rho0)
    m, N, M = make_map("map2"), 64, 10 ** 7
    h0 = histogram_invariant(m, NoiseKernel(SYM, 0.0), N, M, seed=11)
    he = histogram_invariant(m, NoiseKernel(SYM, eps), N, M, seed=12)
    sigma = math.hypot(histogram_std(h0)[1], histogram_std(he)[1])
    assert l1_from_histograms(he, h0) - 3 * sigma <= true


def test_histogram_std_examples():
    h = Histogram(np.array([10_000, 0, 990_000]), 0.0, 1.0, 10 ** 6, 0)
    per_bin, bound = histogram_std(h)
    assert per_bin[0] == pytest.approx(1e-4, rel=1e-12)
    assert per_bin[1] == 0.0
    assert bound == pytest.approx(math.sqrt(3 / 10 ** 6))
    big = Histogram(np.zeros(1 << 16, dtype=np.int64), 0.0, 1.0, 10 ** 10, 0)
    assert histogram_std(big)[1] == pytest.approx(2.5e-3, rel=0.03)


def test_error_model_calibration():
    # the doubling map keeps rho_eps = rho_0, so Phi is pure sampling error
    m, N, M, eps = make_map("map1", a=0.0), 64, 10 ** 5, 0.05
    phis = []
    for s in range(50):
        h0 = histogram_invariant(m, NoiseKernel(SYM, 0.0), N, M, seed=1000 + s)
        he = histogram_invariant(m, NoiseKernel(SYM, eps), N, M, seed=2000 + s)
        phis.append(l1_from_histograms(he, h0))
    rms = math.sqrt(np.mean(np.square(phis)))
    bound = math.sqrt(N / M)
    assert bound / 2 <= rms <= 2 * bound


def test_seed_determinism_histogram():
    m = make_map("map3")
    k = NoiseKernel(SYM, 1e-3)
    a = histogram_invariant(m, k, 256, 10 ** 5, seed=7, chains=3)
    b = histogram_invariant(m, k, 256, 10 ** 5, seed=7, chains=3)
    c = histogram_invariant(m, k, 256, 10 ** 5, seed=8, chains=3)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_escape_raises():
    m = dataclasses.replace(make_map("map3"), params={"a": 3.0})
    with pytest.raises(InvariantViolationError):
        histogram_invariant(m, NoiseKernel(SYM, 0.01), 16, 1000, burn_in=0)


@pytest.mark.parametrize("kw", [dict(bins=0), dict(steps=0), dict(chains=0)])
def test_histogram_bad_arguments(kw):
    args = dict(bins=16, steps=100, chains=1) | kw
    with pytest.raises(ParameterError):
        histogram_invariant(make_map("map2"), NoiseKernel(SYM, 0.01), **args)


def test_quadratic_noise_cap():
    with pytest.raises(ParameterError):
        histogram_invariant(make_map("map3"), NoiseKernel(SYM, 0.2), 16, 100)


# --- autocorrelation ---------------------------------------------------------

def test_tau_iid_signs():
    x = np.random.default_rng(0).choice([-1.0, 1.0], 10 ** 6)
    assert autocorrelation_time(x) == pytest.approx(1.0, abs=0.1)


def test_tau_ar1():
    assert autocorrelation_time(ar1(0.9, 10 ** 6, 1)) == pytest.approx(10.0, rel=0.15)


def test_tau_constant_plus_tiny_noise():
    x = 5.0 + 1e-9 * np.random.default_rng(2).standard_normal(10 ** 4)
    tau = autocorrelation_time(x)
    assert math.isfinite(tau) and tau >= 0.5


def test_tau_floor():
    x = np.tile([1.0, -1.0], 5000)
    assert autocorrelation_time(x) == 0.5


def test_tau_errors():
    with pytest.raises(DegenerateSeriesError):
        autocorrelation_time(np.ones(5000))
    with pytest.raises(InsufficientDataError):
        autocorrelation_time(np.arange(999.0))


# --- stadium observable -----------------------------------------------------

def _oracle_phi(tracer, s, th, eps, depth):
    q = math.pi / 2
    L = tracer.L

    def plus(s, th):
        flat = (q <= s <= q + 2) or (3 * q + 2 <= s <= 3 * q + 4)
        return flat and (th <= eps or th >= math.pi - eps)

    def minus(th):
        return abs(th - math.pi / 2) <= eps

    p, n = plus(s, th), minus(th)
    for _ in range(depth):
        s, th = tracer.step(s, math.pi - th)
        s, th = s % L, math.pi - th
        p, n = p or plus(s, th), n or minus(th)
    return int(p) - int(n) if p != n else 0


def test_phi_matches_cartesian_pullback():
    tracer = CartesianStadium()
    rng = np.random.default_rng(21)
    obs = StadiumObservable(0.1)
    seen = set()
    for s, th in zip(rng.uniform(0, GEOM.perimeter, 1500), rng.uniform(0.02, 3.12, 1500)):
        v = obs(GEOM, s, th)
        assert v in (-1, 0, 1)
        assert v == _oracle_phi(tracer, s, th, 0.1, 4)
        seen.add(v)
    assert seen == {-1, 0, 1}


def test_phi_zero_when_both_sets_met():
    # theta = pi/2 on a flat edge is in the minus set; a tiny angle in the
    # plus set.  A state can only be in both via its pullback, so search.
    obs = StadiumObservable(0.3, depth=4)
    tracer = CartesianStadium()
    rng = np.random.default_rng(3)
    found = 0
    for s, th in zip(rng.uniform(0, GEOM.perimeter, 4000), rng.uniform(0.02, 3.12, 4000)):
        q = math.pi / 2
        p = n = False
        ss, tt = s, th
        for _ in range(5):
            flat = (q <= ss <= q + 2) or (3 * q + 2 <= ss <= 3 * q + 4)
            p |= flat and (tt <= 0.3 or tt >= math.pi - 0.3)
            n |= abs(tt - math.pi / 2) <= 0.3
            ss, tt = tracer.step(ss, math.pi - tt)
            ss, tt = ss % tracer.L, math.pi - tt
        if p and n:
            found += 1
            assert obs(GEOM, s, th) == 0
    assert found > 0


def test_phi_constant_one_gives_zero():
    est = stadium_phi(GEOM, StadiumObservable(0.1, constant=1), 0.1, 10 ** 6)
    assert est.value == 0.0
    assert est.orbit_mean == est.reference == 1.0


def test_phi_at_zero_noise():
    est = stadium_phi(GEOM, StadiumObservable(0.0), 0.0, 10 ** 6,
                      reference_samples=1 << 16)
    assert est.value <= 3 * est.std_error + 1e-15
    assert est.tau_corr >= 0.5


def test_phi_estimate_invariants():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowSignalWarning)
        est = stadium_phi(GEOM, StadiumObservable(0.1), 0.1, 10 ** 6,
                          reference_samples=1 << 20, seed=3)
    assert est.tau_corr >= 0.5
    orbit = math.sqrt(2 * est.variance * est.tau_corr / est.steps)
    assert est.std_error == pytest.approx(math.hypot(orbit, est.reference_error))
    assert est.value == pytest.approx(abs(est.orbit_mean - est.reference))


def test_phi_seed_determinism():
    obs = StadiumObservable(0.1)
    kw = dict(reference_samples=1 << 16, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowSignalWarning)
        a = stadium_phi(GEOM, obs, 0.1, 2 * 10 ** 5, **kw)
        b = stadium_phi(GEOM, obs, 0.1, 2 * 10 ** 5, **kw)
    assert a == b


def test_phi_chunk_consistency():
    obs = StadiumObservable(0.1)
    kw = dict(reference_samples=1 << 18, seed=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowSignalWarning)
        one = stadium_phi(GEOM, obs, 0.1, 10 ** 6, chunks=1, **kw)
        four = stadium_phi(GEOM, obs, 0.1, 10 ** 6, chunks=4, **kw)
    assert abs(one.value - four.value) < 3 * math.hypot(one.std_error, four.std_error)


def test_reference_sobol_error_small():
    ref, err = stadium_reference(GEOM, StadiumObservable(0.1), samples=1 << 20)
    assert 0 < err < 2e-4
    ref2, err2 = stadium_reference(GEOM, StadiumObservable(0.1), samples=1 << 20, seed=1)
    assert abs(ref - ref2) < 5 * math.hypot(err, err2)


def test_phi_contract_errors():
    with pytest.raises(ParameterError):
        stadium_phi(GEOM, StadiumObservable(0.1), 0.2, 1000)
    with pytest.raises(ParameterError):
        stadium_phi(GEOM, StadiumObservable(2.0), 2.0, 1000)
    with pytest.raises(ParameterError):
        stadium_phi(GEOM, StadiumObservable(0.1), 0.1, 3, chunks=4)
    with pytest.raises(ParameterError):
        StadiumObservable(0.1, depth=-1)
