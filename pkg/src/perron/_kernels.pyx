# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_fallback``.

Signatures and floating-point operation order match the numpy versions.
"""
import numpy as np

from libc.math cimport sin, cos, atan2, sqrt, floor, fabs, pow, M_PI, INFINITY
from libc.stdint cimport int64_t

NAME = "compiled"


def stencil_apply(const int64_t[:, ::1] idx, const double[:, ::1] wts,
                  const double[::1] rho, double[::1] out):
    cdef Py_ssize_t n = idx.shape[0], w = idx.shape[1], i, j
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(w):
                acc = acc + wts[i, j] * rho[idx[i, j]]
            out[i] = acc
    return np.asarray(out)


def window_apply(const double[::1] rho, const double[::1] cell_h, bint periodic,
                 const int64_t[:, ::1] idx, const double[:, ::1] coef,
                 const int64_t[::1] k_lo, const int64_t[::1] k_hi,
                 double[::1] out):
    cdef Py_ssize_t n = rho.shape[0], ncell = cell_h.shape[0], i, k
    cdef double[::1] prefix = np.zeros(ncell + 1)
    cdef double total, p_hi, p_lo, middle, part, right
    cdef int64_t a, b
    with nogil:
        for k in range(ncell):
            right = rho[(k + 1) % n] if periodic else rho[k + 1]
            prefix[k + 1] = prefix[k] + cell_h[k] * (0.5 * (rho[k] + right))
        total = prefix[ncell]
        for i in range(n):
            a = k_lo[i]
            b = k_hi[i]
            middle = 0.0
            if b > a:
                if periodic:
                    p_hi = _floordiv(b, ncell) * total + prefix[_mod(b, ncell)]
                    p_lo = _floordiv(a, ncell) * total + prefix[_mod(a, ncell)]
                else:
                    p_hi = prefix[b]
                    p_lo = prefix[a]
                middle = p_hi - p_lo
            part = coef[i, 0] * rho[idx[i, 0]] + coef[i, 1] * rho[idx[i, 1]]
            part = part + coef[i, 2] * rho[idx[i, 2]]
            part = part + coef[i, 3] * rho[idx[i, 3]]
            out[i] = part + middle
    return np.asarray(out)


cdef inline int64_t _floordiv(int64_t a, int64_t b) noexcept nogil:
    cdef int64_t q = a // b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef inline int64_t _mod(int64_t a, int64_t b) noexcept nogil:
    cdef int64_t r = a % b
    if r < 0:
        r += b
    return r


# --- 1-D chains --------------------------------------------------------------

cdef inline double _step(int code, double param, double x) noexcept nogil:
    cdef double c
    if code == 0:
        return 2.0 * x + param * sin(2.0 * M_PI * x)
    if code == 1:
        return x + 0.5 if x <= 0.5 else 2.0 * (1.0 - x)
    if code == 2:
        return 0.9 - param * x * x
    c = pow(2.0, param)
    if x <= 0.5:
        return x + c * pow(fabs(x), 1.0 + param)
    return 2.0 * x - 1.0


def chain_histogram(int code, double param, int noise_code, double eps,
                    bint periodic, double lo, double hi, double[::1] x,
                    const double[:, ::1] u, int64_t[::1] counts):
    cdef Py_ssize_t nch = u.shape[0], steps = u.shape[1], c, s
    cdef Py_ssize_t nbins = counts.shape[0]
    cdef double inv_w = nbins / (hi - lo)
    cdef double y
    cdef int64_t b
    cdef int escaped = 0
    with nogil:
        for c in range(nch):
            y = x[c]
            for s in range(steps):
                y = _step(code, param, y)
                if noise_code == 0:
                    y = y + eps * (2.0 * u[c, s] - 1.0)
                else:
                    y = y + eps * (-u[c, s])
                if periodic:
                    y = y - floor(y)
                    if y >= 1.0:
                        y = 0.0
                elif y < lo or y > hi:
                    escaped = 1
                    break
                b = <int64_t>((y - lo) * inv_w)
                if b > nbins - 1:
                    b = nbins - 1
                counts[b] += 1
            x[c] = y
            if escaped:
                break
    return escaped, np.asarray(x)


# --- stadium -----------------------------------------------------------------

cdef struct Frame:
    double px, py, tx, ty, nx, ny
    int seg


cdef inline Frame _boundary_frame(double w, double r, double s) noexcept nogil:
    cdef double q = M_PI * r / 2.0
    cdef double phi, c, sn
    cdef Frame f
    if s < q or s >= 3.0 * q + 4.0 * w:
        phi = s / r if s < q else (s - (4.0 * q + 4.0 * w)) / r
        c = cos(phi)
        sn = sin(phi)
        f.px = w + r * c; f.py = r * sn; f.tx = -sn; f.ty = c
        f.nx = -c; f.ny = -sn; f.seg = 0
    elif s < q + 2.0 * w:
        f.px = w - (s - q); f.py = r; f.tx = -1.0; f.ty = 0.0
        f.nx = 0.0; f.ny = -1.0; f.seg = 1
    elif s < 3.0 * q + 2.0 * w:
        phi = M_PI / 2.0 + (s - q - 2.0 * w) / r
        c = cos(phi)
        sn = sin(phi)
        f.px = -w + r * c; f.py = r * sn; f.tx = -sn; f.ty = c
        f.nx = -c; f.ny = -sn; f.seg = 2
    else:
        f.px = -w + (s - 3.0 * q - 2.0 * w); f.py = -r; f.tx = 1.0; f.ty = 0.0
        f.nx = 0.0; f.ny = 1.0; f.seg = 3
    return f


cdef int _collide(double w, double r, double s, double theta,
                  double* s_out, double* th_out) noexcept nogil:
    cdef double st = sin(theta), ct, dx, dy, best, t, ox, b, cc, disc, hx, hy
    cdef double q, phi, s_new, ntx, nty, nnx, nny, perim, cx
    cdef int hit, cseg, k
    cdef Frame f
    if fabs(st) < 1e-12:
        return 0
    f = _boundary_frame(w, r, s)
    ct = cos(theta)
    dx = ct * f.tx + st * f.nx
    dy = ct * f.ty + st * f.ny
    best = INFINITY
    hit = -1
    if f.seg != 1 and dy > 0.0:
        t = (r - f.py) / dy
        if t > 0.0 and fabs(f.px + t * dx) <= w + 1e-12 and t < best:
            best = t
            hit = 1
    if f.seg != 3 and dy < 0.0:
        t = (-r - f.py) / dy
        if t > 0.0 and fabs(f.px + t * dx) <= w + 1e-12 and t < best:
            best = t
            hit = 3
    for k in range(2):
        cseg = 2 * k
        cx = w if k == 0 else -w
        ox = f.px - cx
        b = ox * dx + f.py * dy
        if f.seg == cseg:
            t = -2.0 * b
        else:
            cc = ox * ox + f.py * f.py - r * r
            disc = b * b - cc
            if disc < 0.0:
                continue
            t = -b + sqrt(disc)
        if t > 1e-12 and t < best:
            hx = f.px + t * dx
            if (cseg == 0 and hx >= w - 1e-12) or (cseg == 2 and hx <= -w + 1e-12):
                best = t
                hit = cseg
    if hit < 0:
        return 0
    hx = f.px + best * dx
    hy = f.py + best * dy
    q = M_PI * r / 2.0
    if hit == 0:
        phi = atan2(hy, hx - w)
        s_new = r * phi if phi >= 0.0 else 4.0 * q + 4.0 * w + r * phi
        ntx = -sin(phi); nty = cos(phi)
        nnx = -cos(phi); nny = -sin(phi)
    elif hit == 1:
        s_new = q + (w - hx)
        ntx = -1.0; nty = 0.0; nnx = 0.0; nny = -1.0
    elif hit == 2:
        phi = atan2(hy, hx + w)
        if phi < 0.0:
            phi += 2.0 * M_PI
        s_new = q + 2.0 * w + r * (phi - M_PI / 2.0)
        ntx = -sin(phi); nty = cos(phi)
        nnx = -cos(phi); nny = -sin(phi)
    else:
        s_new = 3.0 * q + 2.0 * w + (hx + w)
        ntx = 1.0; nty = 0.0; nnx = 0.0; nny = 1.0
    perim = 4.0 * q + 4.0 * w
    if s_new >= perim:
        s_new -= perim
    if s_new < 0.0:
        s_new += perim
    s_out[0] = s_new
    th_out[0] = atan2(-(dx * nnx + dy * nny), dx * ntx + dy * nty)
    return 1


def stadium_collide(double w, double r, double s, double theta):
    cdef double s2 = s, th2 = theta
    cdef int ok = _collide(w, r, s, theta, &s2, &th2)
    return s2, th2, bool(ok)


cdef inline bint _in_plus(double w, double r, double s, double th, double eps) noexcept nogil:
    cdef double q = M_PI * r / 2.0
    cdef bint flat = (q <= s <= q + 2.0 * w) or (3.0 * q + 2.0 * w <= s <= 3.0 * q + 4.0 * w)
    return flat and (th <= eps or th >= M_PI - eps)


cdef inline bint _in_minus(double th, double eps) noexcept nogil:
    return fabs(th - M_PI / 2.0) <= eps


cdef int _phi(double w, double r, double s, double th, double eps, int depth) noexcept nogil:
    cdef bint plus = _in_plus(w, r, s, th, eps)
    cdef bint minus = _in_minus(th, eps)
    cdef double s2, th2
    cdef int k
    for k in range(depth):
        if not _collide(w, r, s, M_PI - th, &s2, &th2):
            break
        s = s2
        th = M_PI - th2
        plus = plus or _in_plus(w, r, s, th, eps)
        minus = minus or _in_minus(th, eps)
        if plus and minus:
            return 0
    if plus and not minus:
        return 1
    if minus and not plus:
        return -1
    return 0


def stadium_phi(double w, double r, double s, double th, double eps, int depth):
    return _phi(w, r, s, th, eps, depth)


cdef inline double _perturb(double theta, double eps, double u) noexcept nogil:
    cdef double lo = theta - eps if theta > eps else 0.0
    cdef double hi = theta + eps if theta < M_PI - eps else M_PI
    return lo + u * (hi - lo)


def perturb(double theta, double eps, double u):
    return _perturb(theta, eps, u)


def stadium_run(double w, double r, double s, double th, double eps, int depth,
                const double[::1] u, phi_out):
    cdef Py_ssize_t k, n = u.shape[0]
    cdef double s2, th2, t
    cdef signed char[::1] out = phi_out
    with nogil:
        for k in range(n):
            if _collide(w, r, s, th, &s2, &th2):
                s = s2
                th = th2
            if eps > 0.0:
                t = _perturb(th, eps, u[k])
                if sin(t) < 1e-12:
                    t = _perturb(th, eps, 1.0 - u[k])
                th = t
            out[k] = <signed char>_phi(w, r, s, th, eps, depth)
    return s, th


def stadium_phi_batch(double w, double r, const double[::1] s,
                      const double[::1] th, double eps, int depth, phi_out):
    cdef Py_ssize_t k, n = s.shape[0]
    cdef signed char[::1] out = phi_out
    with nogil:
        for k in range(n):
            out[k] = <signed char>_phi(w, r, s[k], th[k], eps, depth)
    return phi_out


def stadium_orbit(double w, double r, double s, double th, double eps,
                  const double[::1] u, double[::1] s_out, double[::1] th_out):
    cdef Py_ssize_t k, n = u.shape[0]
    cdef double s2, th2, t
    with nogil:
        for k in range(n):
            if _collide(w, r, s, th, &s2, &th2):
                s = s2
                th = th2
            if eps > 0.0:
                t = _perturb(th, eps, u[k])
                if sin(t) < 1e-12:
                    t = _perturb(th, eps, 1.0 - u[k])
                th = t
            s_out[k] = s
            th_out[k] = th
    return s, th
