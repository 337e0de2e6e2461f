"""The lp proximal map and the Euclidean ball projection.

``prox_lp`` solves, coordinate by coordinate,

    argmin_w  (1/2)(w - v)^2 + lam |w|^p,   1 < p <= 2,

whose stationarity condition ``u + lam p u^(p-1) = |v|`` has one root on
``[0, |v|]``. The root is found by Newton steps kept inside a shrinking
bracket, falling back to bisection when a step would leave the bracket or
fails to halve the previous one; ``u^(p-2)`` blows up near 0, so plain
Newton from a small iterate is not safe.
"""

import numpy as np

from . import _backend
from .errors import InputError

__all__ = ["prox_lp", "prox_scalar", "project_ball", "soft_threshold"]

PROX_MAX_ITER = 200


def _check_p(p):
    if not 1.0 < p <= 2.0:
        raise InputError(f"p must lie in (1,2], got {p}")


def prox_lp(v, lam, p, tol=1e-12, *, max_iter=PROX_MAX_ITER, backend=None):
    """Elementwise proximal map of ``lam * ||w||_p^p``.

    Parameters
    ----------
    v : array_like
        Point to shrink; any shape.
    lam : float
        Positive regularisation scale.
    p : float
        Exponent in (1, 2]. ``p == 2`` uses the closed form ``v / (1 + 2 lam)``.
    tol : float
        Absolute tolerance on each coordinate.

    Returns
    -------
    ndarray
        Same shape as ``v``. Each output keeps the sign of its input and
        satisfies ``|w_j| <= min(|v_j|, (|v_j| / (lam p))^(1/(p-1)))``.
        When that bound underflows (p near 1, tiny |v_j|) the result is an
        exact 0.

    Raises
    ------
    NumericalError
        If the scalar solver exhausts ``max_iter``.
    """
    _check_p(p)
    if lam <= 0:
        raise InputError("lam must be positive")
    if tol <= 0:
        raise InputError("tol must be positive")
    return _backend.get(backend).prox_array(np.asarray(v, dtype=np.float64), float(lam), float(p),
                                            float(tol), int(max_iter))


def prox_scalar(a, lam, p, tol=1e-12, *, max_iter=PROX_MAX_ITER, backend=None):
    """Nonnegative root of ``u + lam p u^(p-1) = a`` for ``a >= 0``."""
    _check_p(p)
    if a < 0:
        raise InputError("prox_scalar takes a magnitude a >= 0")
    return _backend.get(backend).prox_scalar(float(a), float(lam), float(p), float(tol), int(max_iter))


def project_ball(v, radius, *, backend=None):
    """Project onto ``{w : ||w||_2 <= radius}``.

    Vectors already inside come back unchanged (as a copy); others are
    rescaled onto the sphere, landing a few ulps inside it so that the
    stored vector's norm never exceeds ``radius`` whatever summation order
    is used to measure it.
    """
    if radius < 0:
        raise InputError("radius must be nonnegative")
    out, _ = _backend.get(backend).project_ball(np.asarray(v, dtype=np.float64), float(radius))
    return out


def soft_threshold(v, lam):
    """The p = 1 limit of ``prox_lp``: ``sign(v) max(|v| - lam, 0)``."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
