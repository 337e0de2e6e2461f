"""Closed-form stability and generalization bounds for the lp-regularised GCN.

The stability bound grows geometrically in the iteration count, so it is
accumulated in log space; values beyond the float range are reported as
``inf`` with ``saturated=True`` rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import build_filter, compute_ge, spectral_radius
from .model import propagate, smoothness_constants

__all__ = [
    "BetaResult",
    "BoundInputs",
    "BoundRow",
    "c_p_lambda",
    "check_strong_convexity",
    "evaluate_bounds",
    "generalization_bound",
    "minimizer_radius",
    "stability_beta",
    "stability_beta_detail",
]

_LOG_MAX = math.log(np.finfo(np.float64).max)


def _check_p(p):
    if not 1.0 < p <= 2.0:
        raise InputError(f"p must lie in (1,2], got {p}")


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise InputError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class BoundInputs:
    a_l: float
    a_sigma: float
    lambda_G_max: float
    g_e: float
    eta: float
    n: int
    T: int
    p: float
    lam: float
    lambda_t: float
    B: float
    delta: float = 0.05

    def __post_init__(self):
        _check_p(self.p)
        _check_positive(a_l=self.a_l, a_sigma=self.a_sigma, lambda_G_max=self.lambda_G_max, g_e=self.g_e,
                        eta=self.eta, n=self.n, T=self.T, lam=self.lam, lambda_t=self.lambda_t, B=self.B)
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0,1), got {self.delta}")


@dataclass(frozen=True)
class BetaResult:
    value: float
    log_value: float
    saturated: bool


def minimizer_radius(B, lam, p):
    """``(B/lam)^(1/p)``: norm bound on every regularised risk minimiser."""
    _check_p(p)
    _check_positive(B=B, lam=lam)
    return (B / lam) ** (1.0 / p)


def c_p_lambda(p, lam, lambda_t, B):
    """``28 / (p (p-1) lambda_t) * (B/lam)^((3-p)/p)``; ``inf`` past the float range."""
    log_c = _log_c(p, lam, lambda_t, B)
    if log_c >= _LOG_MAX:
        return math.inf
    return 28.0 / (p * (p - 1.0) * lambda_t) * (B / lam) ** ((3.0 - p) / p)


def _log_c(p, lam, lambda_t, B):
    _check_p(p)
    _check_positive(lam=lam, lambda_t=lambda_t, B=B)
    return math.log(28.0) - math.log(p * (p - 1.0) * lambda_t) + (3.0 - p) / p * (math.log(B) - math.log(lam))


def _log_geometric_sum(log_r, T):
    """``log sum_{t=0}^{T-1} r^t`` without overflow."""
    if log_r == 0.0:
        return math.log(T)
    if log_r > 0.0:
        # r^(T-1) * (1 - r^-T) / (1 - 1/r)
        return (T - 1) * log_r + math.log(-math.expm1(-T * log_r)) - math.log(-math.expm1(-log_r))
    return math.log(-math.expm1(T * log_r)) - math.log(-math.expm1(log_r))


def stability_beta_detail(inputs):
    """Uniform-stability bound of the last SGD iterate, with its logarithm.

    ``beta = a_l^2 a_sigma^2 lambda_G eta C g_e / n * sum_{t=1}^T r^(t-1)``
    with ``r = C (1 + (a_sigma^2 + a_l) eta g_e^2)`` and ``C = c_p_lambda``.
    """
    x = inputs
    log_c = _log_c(x.p, x.lam, x.lambda_t, x.B)
    log_r = log_c + math.log1p((x.a_sigma ** 2 + x.a_l) * x.eta * x.g_e ** 2)
    log_beta = (2 * math.log(x.a_l) + 2 * math.log(x.a_sigma) + math.log(x.lambda_G_max) + math.log(x.eta)
                + log_c + math.log(x.g_e) - math.log(x.n) + _log_geometric_sum(log_r, int(x.T)))
    if log_beta >= _LOG_MAX:
        return BetaResult(math.inf, log_beta, True)
    return BetaResult(math.exp(log_beta), log_beta, False)


def stability_beta(inputs):
    """Value of :func:`stability_beta_detail`; ``inf`` when it exceeds the float range."""
    return stability_beta_detail(inputs).value


def generalization_bound(beta_n, B, n, delta):
    """``2 beta + (4 n beta + B) sqrt(log(1/delta) / (2 n))``."""
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta must lie in (0,1), got {delta}")
    _check_positive(n=n)
    if beta_n < 0 or B < 0:
        raise InputError("beta_n and B must be nonnegative")
    if math.isinf(beta_n):
        return math.inf
    return 2.0 * beta_n + (4.0 * n * beta_n + B) * math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def check_strong_convexity(a, b, p):
    """Slack of ``|a|^p + |b|^p - 2|(a+b)/2|^p >= (b-a)^2 p (p-1) M^(p-2) / 4``, ``M = max(|a|,|b|)``.

    Vectorised over ``a`` and ``b``; a nonnegative result means the
    inequality holds.
    """
    _check_p(p)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = np.maximum(np.abs(a), np.abs(b))
    if np.any(m == 0.0):
        raise InputError("(a, b) must not be (0, 0)")
    lhs = np.abs(a) ** p + np.abs(b) ** p - 2.0 * np.abs(0.5 * (a + b)) ** p
    rhs = 0.25 * (b - a) ** 2 * p * (p - 1.0) * m ** (p - 2.0)
    out = lhs - rhs
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundRow:
    p: float
    filter: str
    lambda_G_max: float
    g_e: float
    C: float
    beta: float
    log_beta: float
    saturated: bool
    gen_bound: float


def evaluate_bounds(dataset, config, delta=0.05, *, filt=None, spectral=None):
    """Theory quantities for one (dataset, config) cell.

    ``n`` is the training-set size and ``T = epochs * n``. The loss and
    activation constants are taken on the score range reachable inside the
    projection ball.
    """
    from .sgd import prepare

    filt = filt if filt is not None else build_filter(dataset.graph, config.filter_kind)
    spectral = spectral if spectral is not None else spectral_radius(filt)
    g_e = compute_ge(filt, dataset.features)
    problem = prepare(dataset, config, z=propagate(filt, dataset.features))
    radius = problem.radius(config.lam, config.p)
    score = radius * float(np.max(np.linalg.norm(problem.z, axis=1)))
    consts = smoothness_constants(config.loss, config.activation, dataset, max(score, 1e-300), mode=config.mode)
    m = dataset.m
    T = max(config.epochs * m, 1)
    inputs = BoundInputs(a_l=consts.a_l, a_sigma=consts.a_sigma, lambda_G_max=spectral.lambda_max_abs,
                         g_e=g_e, eta=config.eta, n=m, T=T, p=config.p, lam=config.lam,
                         lambda_t=config.prox_scale, B=consts.B, delta=delta)
    beta = stability_beta_detail(inputs)
    return BoundRow(p=config.p, filter=config.filter_kind.value, lambda_G_max=spectral.lambda_max_abs, g_e=g_e,
                    C=c_p_lambda(config.p, config.lam, config.prox_scale, consts.B), beta=beta.value,
                    log_beta=beta.log_value, saturated=beta.saturated,
                    gen_bound=generalization_bound(beta.value, consts.B, m, delta))
