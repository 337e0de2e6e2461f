# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: lp prox, ball projection and the projected-prox SGD inner loop.

Mirrors ``_pykernels`` operation for operation; the SGD loop runs without the GIL.
"""

import numpy as np

from libc.math cimport exp, fabs, log1p, pow, sqrt, tanh, copysign, fmin

from .errors import NumericalError

BACKEND = "cython"

cdef double EPS = 2.220446049250313e-16


cdef inline int _prox1(double a, double lam, double p, double tol, int max_iter,
                       double *out) noexcept nogil:
    """Nonnegative root of u + lam p u^(p-1) = a; returns 0 on success, -1 on failure."""
    cdef double c, bound, hi, lo, x, f, df, newton, half, dx, dxold, step, xnew
    cdef int it
    if a == 0.0:
        out[0] = 0.0
        return 0
    if p == 2.0:
        out[0] = a / (1.0 + 2.0 * lam)
        return 0
    c = lam * p
    bound = pow(a / c, 1.0 / (p - 1.0))
    hi = fmin(a, bound)
    if not hi > 0.0:
        out[0] = 0.0
        return 0
    lo = 0.0
    x = hi
    dx = hi - lo
    dxold = dx
    for it in range(max_iter):
        f = x + c * pow(x, p - 1.0) - a
        df = 1.0 + c * (p - 1.0) * pow(x, p - 2.0)
        if f == 0.0:
            out[0] = fmin(fmin(x, a), bound)
            return 0
        if f < 0.0:
            lo = x
        elif f > 0.0:
            hi = x
        newton = x - f / df
        step = f / df
        half = 0.5 * (hi - lo)
        if newton > lo and newton < hi and fabs(step) <= 0.5 * fabs(dxold):
            xnew = newton
            dxold = dx
            dx = step
        else:
            xnew = lo + half
            dxold = dx
            dx = half
        if xnew == x or hi - lo <= tol or fabs(dx) <= tol:
            out[0] = fmin(fmin(xnew, a), bound)
            return 0
        x = xnew
    return -1


def prox_scalar(double a, double lam, double p, double tol, int max_iter):
    cdef double out
    if _prox1(a, lam, p, tol, max_iter, &out) != 0:
        raise NumericalError(f"lp prox solver failed to converge in {max_iter} iterations")
    return out


def prox_array(v, double lam, double p, double tol, int max_iter):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    res = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = res.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double r
    cdef int bad = 0
    with nogil:
        for i in range(n):
            if _prox1(fabs(src[i]), lam, p, tol, max_iter, &r) != 0:
                bad = 1
                break
            dst[i] = copysign(r, src[i])
    if bad:
        raise NumericalError(f"lp prox solver failed to converge in {max_iter} iterations")
    return res


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _act(int kind, double s, double *f, double *df) noexcept nogil:
    cdef double t
    if kind == 0:
        t = _sigmoid(s)
        f[0] = t
        df[0] = t * (1.0 - t)
    elif kind == 1:
        t = tanh(s)
        f[0] = t
        df[0] = 1.0 - t * t
    else:
        f[0] = s
        df[0] = 1.0


cdef inline double _sumsq(double *v, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += v[i] * v[i]
    return acc


def project_ball(v, double radius):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if radius <= 0.0:
        return np.zeros_like(arr), True
    cdef double[::1] flat = arr.reshape(-1)
    cdef Py_ssize_t n = flat.shape[0]
    cdef double target = radius * (1.0 - (n + 2) * EPS)
    cdef double norm = sqrt(_sumsq(&flat[0], n)) if n else 0.0
    if norm > target:
        return arr * (target / norm), True
    return arr.copy(), False


def run_steps(double[:, ::1] z, double[::1] y_real, long long[::1] y_cls,
              long long[::1] nodes, double[:, ::1] w, int mode, int loss, int act,
              double eta, double lam_t, double p, double radius, double tol, int max_iter):
    """In-place projected-prox SGD over ``nodes``; returns the projection count."""
    cdef Py_ssize_t d = w.shape[0], c = w.shape[1], size = d * c
    cdef Py_ssize_t t, j, k, node
    cdef double[::1] s = np.zeros(c)
    cdef double[::1] f = np.zeros(c)
    cdef double[::1] df = np.zeros(c)
    cdef double[::1] delta = np.zeros(c)
    cdef double *wp = &w[0, 0]
    cdef double y, fy, dl, mx, tot, target, norm, scale, r, zj
    cdef int projections = 0, bad = 0
    if radius <= 0.0:
        target = 0.0
    else:
        target = radius * (1.0 - (size + 2) * EPS)
    with nogil:
        for t in range(nodes.shape[0]):
            node = nodes[t]
            for k in range(c):
                s[k] = 0.0
            for j in range(d):
                zj = z[node, j]
                for k in range(c):
                    s[k] += zj * w[j, k]
            for k in range(c):
                _act(act, s[k], &f[k], &df[k])
            if mode == 0:
                y = y_real[node]
                fy = f[0]
                if loss == 0:
                    dl = 2.0 * (fy - y)
                else:
                    dl = -y * _sigmoid(-y * fy)
                delta[0] = dl * df[0]
            else:
                mx = f[0]
                for k in range(1, c):
                    if f[k] > mx:
                        mx = f[k]
                tot = 0.0
                for k in range(c):
                    delta[k] = exp(f[k] - mx)
                    tot += delta[k]
                for k in range(c):
                    delta[k] = delta[k] / tot
                delta[y_cls[node]] -= 1.0
                for k in range(c):
                    delta[k] = delta[k] * df[k]
            for j in range(d):
                zj = z[node, j]
                for k in range(c):
                    w[j, k] = w[j, k] - eta * (zj * delta[k])
            if radius <= 0.0:
                for j in range(size):
                    wp[j] = 0.0
                projections += 1
            else:
                norm = sqrt(_sumsq(wp, size))
                if norm > target:
                    scale = target / norm
                    for j in range(size):
                        wp[j] = wp[j] * scale
                    projections += 1
            for j in range(size):
                if _prox1(fabs(wp[j]), lam_t, p, tol, max_iter, &r) != 0:
                    bad = 1
                    break
                wp[j] = copysign(r, wp[j])
            if bad:
                break
    if bad:
        raise NumericalError(f"lp prox solver failed to converge in {max_iter} iterations")
    return projections
