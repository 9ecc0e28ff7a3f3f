"""Pure numpy implementations of the hot kernels.

Each function here has a twin with the same signature in the compiled
``_kernels`` extension.  Operator kernels and the 1-D chain kernel perform
the same floating-point operations in the same order, so for maps without
transcendental functions both backends agree bit for bit.
"""
from __future__ import annotations

import math

import numpy as np

NAME = "python"


def stencil_apply(idx, wts, rho, out):
    """``out[i] = sum_j wts[i, j] * rho[idx[i, j]]``."""
    np.sum(wts * rho[idx], axis=1, out=out)
    return out


def window_apply(rho, cell_h, periodic, idx, coef, k_lo, k_hi, out):
    """Window integrals of the piecewise-linear interpolant of ``rho``.

    ``idx``/``coef`` (shape ``(n, 4)``) hold the partial-cell terms at the
    two window edges; ``k_lo``/``k_hi`` delimit, in unwrapped cell numbers,
    the whole cells strictly inside the window (``k_hi <= k_lo`` means
    none).
    """
    n = rho.size
    ncell = cell_h.size
    right = np.roll(rho, -1)[:ncell] if periodic else rho[1:]
    cell = cell_h * (0.5 * (rho[:ncell] + right))
    prefix = np.zeros(ncell + 1)
    np.cumsum(cell, out=prefix[1:])
    total = prefix[ncell]
    if periodic:
        p_hi = (k_hi // ncell) * total + prefix[k_hi % ncell]
        p_lo = (k_lo // ncell) * total + prefix[k_lo % ncell]
    else:
        p_hi = prefix[k_hi]
        p_lo = prefix[k_lo]
    middle = np.where(k_hi > k_lo, p_hi - p_lo, 0.0)
    part = np.sum(coef * rho[idx], axis=1)
    np.add(part, middle, out=out[:n])
    return out


# --- 1-D chains --------------------------------------------------------------

def _step(code, param, x):
    if code == 0:
        return 2.0 * x + param * np.sin(2.0 * np.pi * x)
    if code == 1:
        return np.where(x <= 0.5, x + 0.5, 2.0 * (1.0 - x))
    if code == 2:
        return 0.9 - param * x * x
    c = 2.0 ** param
    return np.where(x <= 0.5, x + c * np.abs(x) ** (1.0 + param), 2.0 * x - 1.0)


def chain_histogram(code, param, noise_code, eps, periodic, lo, hi, x, u,
                    counts):
    """Advance ``C`` independent chains through ``u.shape[1]`` noisy steps.

    ``x`` (shape ``(C,)``) is updated in place; visits are added to
    ``counts``.  ``noise_code`` 0 draws ``xi = 2u - 1`` (symmetric), 1 draws
    ``xi = -u`` (one-sided).  Returns the number of escapes from
    ``[lo, hi]`` (non-periodic maps only); the chains stop at the first one.
    """
    nbins = counts.size
    inv_w = nbins / (hi - lo)
    steps = u.shape[1]
    x_io = x
    visits = np.empty(u.shape)
    for s in range(steps):
        x = _step(code, param, x)
        if noise_code == 0:
            x = x + eps * (2.0 * u[:, s] - 1.0)
        else:
            x = x + eps * (-u[:, s])
        if periodic:
            x = x - np.floor(x)
            x = np.where(x >= 1.0, 0.0, x)
        elif np.any((x < lo) | (x > hi)):
            x_io[:] = x
            return 1, x_io
        visits[:, s] = x
    b = ((visits - lo) * inv_w).astype(np.int64)
    np.minimum(b, nbins - 1, out=b)
    counts += np.bincount(b.ravel(), minlength=nbins)
    x_io[:] = x
    return 0, x_io


# --- stadium -----------------------------------------------------------------

def stadium_collide(w, r, s, theta):
    """One noiseless bounce; returns ``(s', theta', ok)``."""
    return _collide(w, r, s, theta)


def _boundary_frame(w, r, s):
    """Point, unit CCW tangent and inward normal at arclength ``s``."""
    q = math.pi * r / 2.0
    if s < q or s >= 3.0 * q + 4.0 * w:
        phi = s / r if s < q else (s - (4.0 * q + 4.0 * w)) / r
        c, sn = math.cos(phi), math.sin(phi)
        return (w + r * c, r * sn, -sn, c, -c, -sn, 0)
    if s < q + 2.0 * w:
        return (w - (s - q), r, -1.0, 0.0, 0.0, -1.0, 1)
    if s < 3.0 * q + 2.0 * w:
        phi = math.pi / 2.0 + (s - q - 2.0 * w) / r
        c, sn = math.cos(phi), math.sin(phi)
        return (-w + r * c, r * sn, -sn, c, -c, -sn, 2)
    return (-w + (s - 3.0 * q - 2.0 * w), -r, 1.0, 0.0, 0.0, 1.0, 3)


def _collide(w, r, s, theta):
    st = math.sin(theta)
    if abs(st) < 1e-12:
        return s, theta, False
    px, py, tx, ty, nx, ny, seg = _boundary_frame(w, r, s)
    ct = math.cos(theta)
    dx = ct * tx + st * nx
    dy = ct * ty + st * ny
    best = math.inf
    hit = -1
    # flat edges y = +r (segment 1) and y = -r (segment 3)
    if seg != 1 and dy > 0.0:
        t = (r - py) / dy
        if t > 0.0 and abs(px + t * dx) <= w + 1e-12 and t < best:
            best, hit = t, 1
    if seg != 3 and dy < 0.0:
        t = (-r - py) / dy
        if t > 0.0 and abs(px + t * dx) <= w + 1e-12 and t < best:
            best, hit = t, 3
    for cseg, cx in ((0, w), (2, -w)):
        ox = px - cx
        b = ox * dx + py * dy
        if seg == cseg:
            t = -2.0 * b
        else:
            cc = ox * ox + py * py - r * r
            disc = b * b - cc
            if disc < 0.0:
                continue
            t = -b + math.sqrt(disc)
        if t > 1e-12 and t < best:
            hx = px + t * dx
            if (cseg == 0 and hx >= w - 1e-12) or (cseg == 2 and hx <= -w + 1e-12):
                best, hit = t, cseg
    if hit < 0:
        return s, theta, False
    hx = px + best * dx
    hy = py + best * dy
    q = math.pi * r / 2.0
    if hit == 0:
        phi = math.atan2(hy, hx - w)
        s_new = r * phi if phi >= 0.0 else 4.0 * q + 4.0 * w + r * phi
        ntx, nty = -math.sin(phi), math.cos(phi)
        nnx, nny = -math.cos(phi), -math.sin(phi)
    elif hit == 1:
        s_new = q + (w - hx)
        ntx, nty, nnx, nny = -1.0, 0.0, 0.0, -1.0
    elif hit == 2:
        phi = math.atan2(hy, hx + w)
        if phi < 0.0:
            phi += 2.0 * math.pi
        s_new = q + 2.0 * w + r * (phi - math.pi / 2.0)
        ntx, nty = -math.sin(phi), math.cos(phi)
        nnx, nny = -math.cos(phi), -math.sin(phi)
    else:
        s_new = 3.0 * q + 2.0 * w + (hx + w)
        ntx, nty, nnx, nny = 1.0, 0.0, 0.0, 1.0
    perim = 4.0 * q + 4.0 * w
    if s_new >= perim:
        s_new -= perim
    if s_new < 0.0:
        s_new += perim
    # reflection keeps the tangential part and flips the normal one
    th = math.atan2(-(dx * nnx + dy * nny), dx * ntx + dy * nty)
    return s_new, th, True


def _in_plus(w, r, s, th, eps):
    q = math.pi * r / 2.0
    flat = (q <= s <= q + 2.0 * w) or (3.0 * q + 2.0 * w <= s <= 3.0 * q + 4.0 * w)
    return flat and (th <= eps or th >= math.pi - eps)


def _in_minus(th, eps):
    return abs(th - math.pi / 2.0) <= eps


def stadium_phi(w, r, s, th, eps, depth):
    """Observable value in {-1, 0, +1} via ``depth``-step time-reversed pullback."""
    plus = _in_plus(w, r, s, th, eps)
    minus = _in_minus(th, eps)
    for _ in range(depth):
        s, th, ok = _collide(w, r, s, math.pi - th)
        if not ok:
            break
        th = math.pi - th
        plus = plus or _in_plus(w, r, s, th, eps)
        minus = minus or _in_minus(th, eps)
        if plus and minus:
            return 0
    if plus and not minus:
        return 1
    if minus and not plus:
        return -1
    return 0


def perturb(theta, eps, u):
    lo = theta - eps if theta > eps else 0.0
    hi = theta + eps if theta < math.pi - eps else math.pi
    return lo + u * (hi - lo)


def stadium_run(w, r, s, th, eps, depth, u, phi_out):
    """Noisy trajectory: bounce, perturb the angle, record the observable.

    Returns the final state ``(s, theta)``.
    """
    for k in range(u.size):
        s2, th2, ok = _collide(w, r, s, th)
        if ok:
            s, th = s2, th2
        if eps > 0.0:
            t = perturb(th, eps, u[k])
            if math.sin(t) < 1e-12:
                t = perturb(th, eps, 1.0 - u[k])
            th = t
        phi_out[k] = stadium_phi(w, r, s, th, eps, depth)
    return s, th


def stadium_phi_batch(w, r, s, th, eps, depth, phi_out):
    for k in range(s.size):
        phi_out[k] = stadium_phi(w, r, s[k], th[k], eps, depth)
    return phi_out


def stadium_orbit(w, r, s, th, eps, u, s_out, th_out):
    """Like :func:`stadium_run` but records the states instead of the observable."""
    for k in range(u.size):
        s2, th2, ok = _collide(w, r, s, th)
        if ok:
            s, th = s2, th2
        if eps > 0.0:
            t = perturb(th, eps, u[k])
            if math.sin(t) < 1e-12:
                t = perturb(th, eps, 1.0 - u[k])
            th = t
        s_out[k] = s
        th_out[k] = th
    return s, th
