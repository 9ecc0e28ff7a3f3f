import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from perron.errors import (DomainError, OneSidedDerivativeError, ParameterError,
                           UnsupportedMapError)
from perron.maps import (MISIUREWICZ_A, MISIUREWICZ_A2, MISIUREWICZ_FIXED_POINT,
                         critical_orbit, derivative, forward, inverse_branches, make_map)

from oracles import smooth_preimages


def test_aliases_and_invariants():
    m1, m2, m3, m4 = (make_map(f"map{i}") for i in range(1, 5))
    assert (m1.id, m1.branch_count, m1.discontinuities, m1.periodic) == (
        "smooth-expanding", 2, (), True)
    assert m2.discontinuities == (0.0, 0.5) and m2.periodic
    assert m3.domain == (-1.0, 1.0) and not m3.periodic
    assert not m3.supports_inverse
    assert m4.discontinuities == (0.0, 0.5) and m4.periodic


@pytest.mark.parametrize("name,params", [
    ("map1", {"a": 1 / (2 * math.pi)}), ("map1", {"a": -0.1}), ("map3", {"a": 1.9}),
    ("map3", {"a": 0.0}), ("map4", {"alpha": 1.0}), ("map4", {"alpha": 0.0}),
    ("map5", {}), ("map2", {"a": 1.0})])
def test_bad_parameters(name, params):
    with pytest.raises(ParameterError):
        make_map(name, **params)


def test_forward_examples():
    assert forward(make_map("map1", a=0.15), 0.25) == pytest.approx(0.65, abs=1e-15)
    pw = make_map("map2")
    assert forward(pw, 0.25) == 0.75
    assert forward(pw, 0.75) == 0.5
    q = make_map("map3", a=MISIUREWICZ_A)
    assert forward(q, 0.0) == 0.9
    x = 0.0
    for _ in range(3):
        x = forward(q, x)
    assert abs(x - MISIUREWICZ_FIXED_POINT) < 1e-9


def test_periodic_reduction():
    m = make_map("map1", a=0.0)
    assert forward(m, 0.5) == 0.0
    assert 0.0 <= forward(m, 0.999999) < 1.0


def test_domain_errors():
    with pytest.raises(DomainError):
        forward(make_map("map3"), 1.5)
    with pytest.raises(DomainError):
        forward(make_map("map2"), -0.1)
    with pytest.raises(DomainError):
        inverse_branches(make_map("map2"), 1.2)


def test_inverse_examples():
    br = sorted(inverse_branches(make_map("map2"), 0.75))
    assert br == [(0.25, 1.0), (0.625, 2.0)]
    br = sorted(inverse_branches(make_map("map1", a=0.0), 0.3))
    assert br[0] == pytest.approx((0.15, 2.0)) and br[1] == pytest.approx((0.65, 2.0))
    m4 = make_map("map4", alpha=0.5)
    br = sorted(inverse_branches(m4, 0.6))
    left = brentq(lambda y: y + math.sqrt(2) * y ** 1.5 - 0.6, 0.0, 0.5, xtol=1e-15)
    assert br[0][0] == pytest.approx(left, abs=1e-12)
    assert br[1] == pytest.approx((0.8, 2.0), abs=1e-15)


def test_quadratic_has_no_inverse():
    with pytest.raises(UnsupportedMapError):
        inverse_branches(make_map("map3"), 0.1)


def test_derivative_examples():
    assert derivative(make_map("map1", a=0.15), 0.0) == pytest.approx(2 + 2 * math.pi * 0.15)
    pw = make_map("map2")
    assert derivative(pw, 0.2) == 1.0 and derivative(pw, 0.8) == -2.0
    m4 = make_map("map4", alpha=0.5)
    assert derivative(m4, 0.25) == pytest.approx(1 + 1.5 * math.sqrt(2) * 0.5, rel=1e-14)
    fd = (forward(m4, 0.25 + 1e-7) - forward(m4, 0.25 - 1e-7)) / 2e-7
    assert derivative(m4, 0.25) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("name", ["map2", "map4"])
def test_derivative_at_discontinuity(name):
    for x in (0.0, 0.5):
        with pytest.raises(OneSidedDerivativeError):
            derivative(make_map(name), x)


@pytest.mark.parametrize("name,params", [
    ("map1", {"a": 0.15}), ("map1", {"a": 0.0}), ("map2", {}),
    ("map4", {"alpha": 0.3}), ("map4", {"alpha": 0.7})])
def test_branch_consistency(name, params):
    m = make_map(name, **params)
    xs = np.random.default_rng(3).random(10_000)
    y, d, valid = m.preimages(xs)
    fy = m.forward_array(np.where(valid, y, 0.25).ravel()).reshape(y.shape)
    diff = np.abs(fy - xs[:, None])
    diff = np.minimum(diff, 1.0 - diff)
    assert np.all(diff[valid] <= 1e-10)
    dd = np.abs(m.derivative_array(np.where(valid, y, 0.25).ravel())).reshape(y.shape)
    np.testing.assert_allclose(dd[valid], d[valid], rtol=0, atol=1e-10)
    assert np.all(d[valid] > 0)
    counts = valid.sum(axis=1)
    assert set(np.unique(counts)) <= {1, 2}


def test_smooth_inverse_matches_bisection_oracle():
    m = make_map("map1", a=0.15)
    for x in np.linspace(0.01, 0.99, 37):
        got = sorted(inverse_branches(m, x))
        want = sorted(smooth_preimages(0.15, x))
        for (y, d), (yo, do) in zip(got, want):
            assert y == pytest.approx(yo, abs=1e-13)
            assert d == pytest.approx(do, rel=1e-12)


@given(st.floats(0.0, 1 / (2 * math.pi) - 1e-9), st.floats(0.0, 0.999999))
def test_expansion(a, x):
    m = make_map("map1", a=a)
    assert derivative(m, x) >= 2 - 2 * math.pi * a - 1e-12 > 1 - 1e-9


@given(st.floats(0.01, 0.99), st.floats(0.001, 0.999))
def test_finite_difference_derivative(alpha, x):
    m = make_map("map4", alpha=alpha)
    if abs(x - 0.5) < 1e-3:
        return
    h = 1e-6 * max(x, 1e-3)
    fd = (m.forward_array(np.array([x + h]))[0] - m.forward_array(np.array([x - h]))[0]) / (2 * h)
    if abs(fd) > 5:  # straddled the mod-1 wrap
        return
    assert derivative(m, x) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_neutral_tangency(alpha):
    assert derivative(make_map("map4", alpha=alpha), 1e-8) - 1 < 1e-3


def test_neutral_tangency_small_alpha():
    # f' - 1 = (1 + alpha) 2^alpha x^alpha decays slowly for small alpha
    m = make_map("map4", alpha=0.3)
    assert derivative(m, 1e-8) - 1 == pytest.approx(1.3 * 2 ** 0.3 * 1e-8 ** 0.3, rel=1e-9)
    assert derivative(m, 1e-12) - 1 < 1e-3


@pytest.mark.parametrize("a,steps", [(MISIUREWICZ_A, 3), (MISIUREWICZ_A2, 40)])
def test_misiurewicz_orbit(a, steps):
    m = make_map("map3", a=a)
    orbit = critical_orbit(m, steps + 20)
    if a == MISIUREWICZ_A:
        p = orbit[steps]
        assert abs(forward(m, p) - p) < 1e-8
    else:
        # eventual periodicity only: some later point returns near an earlier one
        tail = np.array(orbit[5:])
        close = min(abs(tail[i] - tail[j]) for i in range(len(tail))
                    for j in range(i + 1, min(i + 8, len(tail))))
        assert close < 1e-6


def test_critical_orbit_only_for_quadratic():
    with pytest.raises(UnsupportedMapError):
        critical_orbit(make_map("map1"), 3)
