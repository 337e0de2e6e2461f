"""Pure-Python kernels: the fallback used when the compiled extension is absent.

Same algorithms and the same per-element arithmetic as ``_ckernels.pyx``;
the prox solver is vectorised over coordinates with numpy masks.
"""

import math

import numpy as np

from .errors import NumericalError
from .model import ACT_CODES, LOSS_CODES, LossKind, activation, loss_derivative

BACKEND = "python"
_EPS = np.finfo(np.float64).eps


def prox_scalar(a, lam, p, tol, max_iter):
    """Root of ``u + lam p u^(p-1) = a`` on ``[0, a]`` for ``a >= 0``."""
    out = prox_array(np.array([a], dtype=np.float64), lam, p, tol, max_iter)
    return float(out[0])


def prox_array(v, lam, p, tol, max_iter):
    """Elementwise lp prox: sign(v) times the safeguarded Newton/bisection root."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v).ravel()
    out = np.zeros_like(a)
    if p == 2.0:
        out = a / (1.0 + 2.0 * lam)
        return np.copysign(out, v.ravel()).reshape(v.shape)
    c = lam * p
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        bound = np.power(a / c, 1.0 / (p - 1.0))
    hi = np.minimum(a, bound)
    act = np.flatnonzero(hi > 0.0)
    if act.size:
        with np.errstate(over="ignore", divide="ignore"):
            out[act] = _solve(a[act], hi[act], c, p, tol, max_iter)
        out[act] = np.minimum(np.minimum(out[act], a[act]), bound[act])
    return np.copysign(out, v.ravel()).reshape(v.shape)


def _solve(a, hi, c, p, tol, max_iter):
    n = a.size
    lo = np.zeros(n)
    x = hi.copy()
    result = np.full(n, np.nan)
    dx = hi - lo
    dxold = dx.copy()
    live = np.arange(n)
    pm1, pm2 = p - 1.0, p - 2.0
    for _ in range(max_iter):
        xa = x[live]
        f = xa + c * np.power(xa, pm1) - a[live]
        df = 1.0 + c * pm1 * np.power(xa, pm2)
        zero = f == 0.0
        lo_l, hi_l = lo[live], hi[live]
        lo_l = np.where(f < 0.0, xa, lo_l)
        hi_l = np.where(f > 0.0, xa, hi_l)
        lo[live], hi[live] = lo_l, hi_l
        newton = xa - f / df
        step_ok = (newton > lo_l) & (newton < hi_l) & (np.abs(f / df) <= 0.5 * np.abs(dxold[live]))
        half = 0.5 * (hi_l - lo_l)
        new_dx = np.where(step_ok, f / df, half)
        new_x = np.where(step_ok, newton, lo_l + half)
        dxold[live] = dx[live]
        dx[live] = new_dx
        stuck = (new_x == xa) | (hi_l - lo_l <= tol)
        done = zero | (np.abs(new_dx) <= tol) | stuck
        result[live[zero]] = xa[zero]
        fin = done & ~zero
        result[live[fin]] = new_x[fin]
        x[live] = new_x
        live = live[~done]
        if live.size == 0:
            return result
    raise NumericalError(f"lp prox solver failed to converge in {max_iter} iterations")


def project_ball(v, radius):
    """Scale ``v`` into the l2 ball; the target sits ``(size+2)`` ulps inside the radius
    so the norm stays within ``radius`` under any summation order."""
    v = np.asarray(v, dtype=np.float64)
    if radius <= 0.0:
        return np.zeros_like(v), True
    target = radius * (1.0 - (v.size + 2) * _EPS)
    norm = math.sqrt(float(np.dot(v.ravel(), v.ravel())))
    if norm > target:
        return v * (target / norm), True
    return v.copy(), False


def run_steps(z, y_real, y_cls, nodes, w, mode, loss, act, eta, lam_t, p, radius, tol, max_iter):
    """Apply one projected-prox SGD step per entry of ``nodes`` to ``w`` (d x c) in place.

    Returns the number of steps whose gradient step left the ball.
    """
    loss_kind = {v: k for k, v in LOSS_CODES.items()}[loss]
    act_kind = {v: k for k, v in ACT_CODES.items()}[act]
    projections = 0
    for node in nodes:
        zr = z[node]
        s = zr @ w
        f, df = activation(act_kind, s)
        if mode == 0:
            dl = loss_derivative(loss_kind, y_real[node], f[0])
            g = np.outer(zr, np.atleast_1d(dl * df))
        else:
            dl = loss_derivative(LossKind.SOFTMAX_CE, y_cls[node], f)
            g = np.outer(zr, dl * df)
        v, hit = project_ball(w - eta * g, radius)
        projections += hit
        w[...] = prox_array(v, lam_t, p, tol, max_iter)
    return projections
