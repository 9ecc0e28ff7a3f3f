"""Reference implementations the tests compare against.

Each one is written from the defining formulas, without reusing package
code paths, so agreement is evidence rather than tautology.
"""
import math

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq


def piecewise_rho0(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5, 2.0 / 3.0, 4.0 / 3.0)


def window_integral(nodes, values, length, periodic, a, b):
    """Exact integral over [a, b] of the piecewise-linear interpolant."""
    x = np.asarray(nodes, dtype=float)
    v = np.asarray(values, dtype=float)
    if periodic:
        k0 = math.floor((a - x[0]) / length) - 1
        k1 = math.ceil((b - x[0]) / length) + 1
        xs = np.concatenate([x + k * length for k in range(k0, k1 + 1)])
        vs = np.tile(v, k1 - k0 + 1)
    else:
        xs, vs = x, v
    inner = xs[(xs > a) & (xs < b)]
    pts = np.concatenate([[a], inner, [b]])
    return float(trapezoid(np.interp(pts, xs, vs), pts))


def smooth_preimages(a, x):
    """Both preimages of x under y -> 2y + a sin(2 pi y) mod 1, by brentq."""
    f = lambda y: 2.0 * y + a * math.sin(2.0 * math.pi * y)
    out = []
    for target in (x, x + 1.0):
        y = brentq(lambda t: f(t) - target, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        out.append((y, 2.0 + 2.0 * math.pi * a * math.cos(2.0 * math.pi * y)))
    return out


def exact_transfer(a, rho, x):
    """(T rho)(x) for the smooth expanding map with analytic rho."""
    return sum(rho(y) / d for y, d in smooth_preimages(a, x))


class CartesianStadium:
    """Straight-line ray tracer in the plane, independent of boundary charts."""

    def __init__(self, w=1.0, r=1.0):
        self.w, self.r = w, r
        self.q = math.pi * r / 2.0
        self.L = 4.0 * w + 2.0 * math.pi * r

    def point(self, s):
        w, r, q = self.w, self.r, self.q
        s = s % self.L
        if s < q:
            a = s / r
            return np.array([w + r * math.cos(a), r * math.sin(a)]), np.array([-math.sin(a), math.cos(a)])
        s -= q
        if s < 2 * w:
            return np.array([w - s, r]), np.array([-1.0, 0.0])
        s -= 2 * w
        if s < 2 * q:
            a = math.pi / 2 + s / r
            return np.array([-w + r * math.cos(a), r * math.sin(a)]), np.array([-math.sin(a), math.cos(a)])
        s -= 2 * q
        if s < 2 * w:
            return np.array([-w + s, -r]), np.array([1.0, 0.0])
        s -= 2 * w
        a = -math.pi / 2 + s / r
        return np.array([w + r * math.cos(a), r * math.sin(a)]), np.array([-math.sin(a), math.cos(a)])

    def arclength(self, p):
        w, r, q = self.w, self.r, self.q
        x, y = p
        if x >= w:
            a = math.atan2(y, x - w)
            return a * r if a >= 0 else self.L + a * r
        if x <= -w:
            a = math.atan2(y, x + w) % (2 * math.pi)
            return q + 2 * w + (a - math.pi / 2) * r
        if y > 0:
            return q + (w - x)
        return 3 * q + 2 * w + (x + w)

    def step(self, s, theta):
        p, t = self.point(s)
        n = np.array([-t[1], t[0]])          # inward normal (ccw boundary)
        d = math.cos(theta) * t + math.sin(theta) * n
        cands = []
        for yline in (self.r, -self.r):
            if abs(d[1]) > 1e-15:
                tt = (yline - p[1]) / d[1]
                hx = p[0] + tt * d[0]
                if tt > 1e-9 and -self.w <= hx <= self.w:
                    cands.append(tt)
        for cx, side in ((self.w, 1), (-self.w, -1)):
            o = p - np.array([cx, 0.0])
            b = o @ d
            c = o @ o - self.r ** 2
            disc = b * b - c
            if disc >= 0:
                for tt in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
                    hx = p[0] + tt * d[0]
                    if tt > 1e-9 and side * (hx - cx) >= -1e-12:
                        cands.append(tt)
        tt = min(cands)
        h = p + tt * d
        s2 = self.arclength(h)
        _, t2 = self.point(s2)
        n2 = np.array([-t2[1], t2[0]])
        # reflect: the outgoing direction keeps the tangential part
        out = d - 2 * (d @ n2) * n2
        th2 = math.atan2(out @ n2, out @ t2)
        return s2, th2


def ar1(phi, n, seed):
    from scipy.signal import lfilter

    e = np.random.default_rng(seed).standard_normal(n)
    e[0] /= math.sqrt(1 - phi * phi)
    return lfilter([1.0], [1.0, -phi], e)
