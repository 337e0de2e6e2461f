"""Inexact proximal SGD for the lp-regularised single-layer GCN.

One step draws a training node ``i`` uniformly with replacement, takes a
gradient step on its loss, projects onto the ball ``||w|| <= (B/lam)^(1/p)``
and applies the lp prox with scale ``lambda_t``:

    v      = Proj(w - eta * grad L_i(w))
    w_next = prox_lp(v, lambda_t, p)

Inner loops run in the compiled kernel when it is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import InputError
from .graph import FilterKind, build_filter
from .metrics import EpochRecord, RunMetrics, error_rate, sparsity_ratio
from .model import (
    ACT_CODES,
    LOSS_CODES,
    MODE_CODES,
    ActivationKind,
    LossKind,
    Mode,
    ModelParams,
    activation,
    batch_losses,
    check_combination,
    loss_at_zero,
    loss_derivative,
    propagate,
)
from .prox import PROX_MAX_ITER, prox_lp

__all__ = [
    "Problem",
    "SgdState",
    "TrainConfig",
    "Trajectory",
    "fit_full_batch",
    "prepare",
    "sample_sequence",
    "sgd_step",
    "train",
]

SAMPLING_MODES = ("uniform", "shuffle")
INIT_MODES = ("zeros", "gaussian")


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser and run settings.

    ``lambda_t`` defaults to ``eta * lam``. ``record_every`` is a step count
    between weight snapshots (``None``: one snapshot per epoch). ``loss`` and
    ``activation`` default by mode: logistic/sigmoid in theory mode,
    softmax_ce/identity in experiment mode.
    """

    p: float = 2.0
    lam: float = 1e-3
    eta: float = 0.1
    lambda_t: float | None = None
    epochs: int = 200
    loss: LossKind | None = None
    activation: ActivationKind | None = None
    filter_kind: FilterKind = FilterKind.AUGMENTED_NORMALIZED
    seed: int = 0
    prox_tol: float = 1e-12
    record_every: int | None = None
    mode: Mode = Mode.THEORY
    sampling: str = "uniform"
    init: str = "zeros"
    init_scale: float = 0.01
    eps_sparsity: float = 1e-6
    backend: str | None = None

    def __post_init__(self):
        mode = Mode.parse(self.mode)
        set_ = object.__setattr__
        set_(self, "mode", mode)
        set_(self, "filter_kind", FilterKind.parse(self.filter_kind))
        default_loss = LossKind.LOGISTIC if mode is Mode.THEORY else LossKind.SOFTMAX_CE
        default_act = ActivationKind.SIGMOID if mode is Mode.THEORY else ActivationKind.IDENTITY
        set_(self, "loss", LossKind.parse(self.loss) if self.loss is not None else default_loss)
        set_(self, "activation",
             ActivationKind.parse(self.activation) if self.activation is not None else default_act)
        check_combination(mode, self.loss)
        if not 1.0 < self.p <= 2.0:
            raise InputError(f"p must lie in (1,2], got {self.p}")
        for name in ("lam", "prox_tol", "eps_sparsity"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive, got {getattr(self, name)}")
        # eta = 0 (pure prox shrinkage) is allowed for diagnostics but needs an explicit lambda_t
        if not self.eta >= 0:
            raise InputError(f"eta must be nonnegative, got {self.eta}")
        if self.eta == 0 and self.lambda_t is None:
            raise InputError("eta = 0 needs an explicit lambda_t")
        if self.lambda_t is not None and not self.lambda_t > 0:
            raise InputError(f"lambda_t must be positive, got {self.lambda_t}")
        if self.epochs < 0:
            raise InputError("epochs must be nonnegative")
        if self.record_every is not None and self.record_every < 1:
            raise InputError("record_every must be a positive step count")
        if self.sampling not in SAMPLING_MODES:
            raise InputError(f"sampling must be one of {SAMPLING_MODES}")
        if self.init not in INIT_MODES:
            raise InputError(f"init must be one of {INIT_MODES}")

    @property
    def prox_scale(self):
        return self.lambda_t if self.lambda_t is not None else self.eta * self.lam

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(eq=False)
class Problem:
    """Everything a run needs that depends only on (dataset, filter, loss, mode)."""

    z: np.ndarray
    y_real: np.ndarray
    y_cls: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    B: float
    n_classes: int
    mode: Mode

    def radius(self, lam, p):
        return (self.B / lam) ** (1.0 / p)

    def labels(self):
        return self.y_real if self.mode is Mode.THEORY else self.y_cls


@dataclass
class SgdState:
    params: ModelParams
    step: int
    rng: np.random.Generator
    radius: float


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    index_sequence: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    epoch_weights: list = field(default_factory=list)
    projections: int = 0


def prepare(dataset, config, z=None):
    """Propagate features through the configured filter and fix labels and ``B``."""
    mode = config.mode
    if z is None:
        z = propagate(build_filter(dataset.graph, config.filter_kind), dataset.features)
    if mode is Mode.THEORY:
        y_real = dataset.signed_labels()
        y_cls = np.zeros(dataset.n, dtype=np.int64)
        n_classes = 1
        B = loss_at_zero(config.loss, config.activation, y_real[dataset.train_idx])
    else:
        y_cls = np.ascontiguousarray(dataset.labels, dtype=np.int64)
        if y_cls.min() < 0:
            raise InputError("experiment mode needs class indices 0..c-1")
        y_real = np.zeros(dataset.n)
        n_classes = dataset.n_classes
        B = loss_at_zero(config.loss, config.activation, y_cls, n_classes=n_classes)
    return Problem(np.ascontiguousarray(z, dtype=np.float64), np.ascontiguousarray(y_real, dtype=np.float64),
                   y_cls, dataset.train_idx, dataset.test_idx, B, n_classes, mode)


def _streams(seed):
    sampling, init = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(sampling), np.random.default_rng(init)


def sample_sequence(rng, train_idx, epochs, sampling="uniform"):
    """Node ids for ``epochs`` epochs of ``len(train_idx)`` steps each."""
    m = len(train_idx)
    if sampling == "uniform":
        pos = rng.integers(0, m, size=epochs * m)
    else:
        pos = np.concatenate([rng.permutation(m) for _ in range(epochs)]) if epochs else np.zeros(0, np.int64)
    return np.asarray(train_idx, dtype=np.int64)[pos]


def initial_weights(config, d, n_classes, rng):
    shape = (d,) if config.mode is Mode.THEORY else (d, n_classes)
    if config.init == "zeros":
        return ModelParams(np.zeros(shape), config.mode)
    return ModelParams(config.init_scale * rng.standard_normal(shape), config.mode)


def _run(problem, w2d, nodes, config, radius):
    kernels = _backend.get(config.backend)
    return kernels.run_steps(problem.z, problem.y_real, problem.y_cls,
                             np.ascontiguousarray(nodes, dtype=np.int64), w2d,
                             MODE_CODES[config.mode], LOSS_CODES[config.loss], ACT_CODES[config.activation],
                             float(config.eta), float(config.prox_scale), float(config.p), float(radius),
                             float(config.prox_tol), PROX_MAX_ITER)


def sgd_step(state, dataset, z_matrix, config, problem=None):
    """One step: sample, gradient step, project, prox. Returns a new state."""
    problem = problem or prepare(dataset, config, z=z_matrix)
    m = len(problem.train_idx)
    node = int(problem.train_idx[state.rng.integers(0, m)])
    params = state.params.copy()
    _run(problem, params.as_matrix(), np.array([node]), config, state.radius)
    return SgdState(params, state.step + 1, state.rng, state.radius)


def _evaluate(problem, params, config):
    labels = problem.labels()
    tr = error_rate(params, problem.z, labels, problem.train_idx, config.loss, config.activation)
    if problem.test_idx.size:
        te = error_rate(params, problem.z, labels, problem.test_idx, config.loss, config.activation)
    else:
        te = math.nan
    return tr, te


def train(dataset, config, *, index_sequence=None, init=None, problem=None):
    """Run ``config.epochs`` epochs of inexact proximal SGD.

    One epoch is ``m`` steps (``m`` = training set size). Deterministic for a
    fixed seed and backend.

    Parameters
    ----------
    index_sequence : array of node ids, optional
        Replaces the sampled sequence (twin runs share one).
    init : ModelParams, optional
        Starting weights; defaults to zeros (or seeded Gaussian per config).
    problem : Problem, optional
        Precomputed output of :func:`prepare`.

    Returns
    -------
    (ModelParams, Trajectory, RunMetrics)
    """
    problem = problem or prepare(dataset, config)
    sample_rng, init_rng = _streams(config.seed)
    m = len(problem.train_idx)
    total = config.epochs * m
    if index_sequence is None:
        index_sequence = sample_sequence(sample_rng, problem.train_idx, config.epochs, config.sampling)
    index_sequence = np.asarray(index_sequence, dtype=np.int64)
    if index_sequence.size != total:
        raise InputError(f"index sequence has {index_sequence.size} entries, expected {total}")
    params = init.copy() if init is not None else initial_weights(config, problem.z.shape[1],
                                                                  problem.n_classes, init_rng)
    radius = problem.radius(config.lam, config.p)
    w2d = params.as_matrix()
    every = config.record_every or m
    traj = Trajectory(index_sequence=index_sequence)
    traj.snapshots.append((0, params.weights.copy()))
    metrics = RunMetrics()
    step = 0
    for epoch in range(1, config.epochs + 1):
        end = epoch * m
        while step < end:
            stop = min(end, (step // every + 1) * every)
            traj.projections += _run(problem, w2d, index_sequence[step:stop], config, radius)
            step = stop
            if step % every == 0:
                traj.snapshots.append((step, params.weights.copy()))
        traj.epoch_weights.append(params.weights.copy())
        tr, te = _evaluate(problem, params, config)
        metrics.append(EpochRecord(epoch, tr, te, abs(tr - te), math.nan,
                                   sparsity_ratio(params.weights, config.eps_sparsity)))
    if not traj.snapshots or traj.snapshots[-1][0] != total:
        traj.snapshots.append((total, params.weights.copy()))
    return params, traj, metrics


def _full_gradient(problem, params, config):
    idx = problem.train_idx
    z = problem.z[idx]
    s = z @ params.weights
    f, df = activation(config.activation, s)
    if config.mode is Mode.THEORY:
        dl = loss_derivative(config.loss, problem.y_real[idx], f)
        return z.T @ (dl * df) / idx.size
    g = np.exp(f - f.max(axis=1, keepdims=True))
    g /= g.sum(axis=1, keepdims=True)
    g[np.arange(idx.size), problem.y_cls[idx]] -= 1.0
    return z.T @ (g * df) / idx.size


def _smooth_objective(problem, params, config):
    idx = problem.train_idx
    f = activation(config.activation, problem.z[idx] @ params.weights)[0]
    labels = problem.labels()[idx]
    return float(batch_losses(config.loss, labels, f).mean())


def fit_full_batch(dataset, config, *, tol=1e-6, max_iter=200_000, problem=None):
    """Minimise the regularised empirical risk with full-batch proximal gradient.

    Objective: ``mean_i loss_i(w) + lam ||w||_p^p``, without the ball
    constraint. Stops when the proximal gradient mapping
    ``||w - prox(w - t grad)|| / t`` falls below ``tol``; that mapping is the
    composite-objective stand-in for a gradient norm (the gradient of
    ``|w|^p`` is not finite-precision resolvable near 0 when p is close to 1).
    Step sizes use backtracking with FISTA momentum and adaptive restart.

    Returns
    -------
    params : ModelParams
    info : dict
        ``iterations``, ``mapping_norm``, ``converged``.
    """
    problem = problem or prepare(dataset, config)
    shape = (problem.z.shape[1],) if config.mode is Mode.THEORY else (problem.z.shape[1], problem.n_classes)
    w = ModelParams(np.zeros(shape), config.mode)
    y = w.copy()
    t = 1.0
    step = 1.0
    mapping = math.inf
    lam, p = config.lam, config.p

    def regulariser(v):
        return lam * float(np.sum(np.abs(v) ** p))

    def objective(v):
        return _smooth_objective(problem, v, config) + regulariser(v.weights)

    prev_obj = objective(w)
    for it in range(1, max_iter + 1):
        g = _full_gradient(problem, y, config)
        fy = _smooth_objective(problem, y, config)
        while True:
            cand = ModelParams(prox_lp(y.weights - step * g, step * lam, p, config.prox_tol,
                                       backend=config.backend), config.mode)
            diff = cand.weights - y.weights
            if _smooth_objective(problem, cand, config) <= fy + float(np.sum(g * diff)) + float(np.sum(diff * diff)) / (2 * step) + 1e-15:
                break
            step *= 0.5
        # stationarity measured at the new point
        gc = _full_gradient(problem, cand, config)
        probe = prox_lp(cand.weights - step * gc, step * lam, p, config.prox_tol, backend=config.backend)
        mapping = float(np.linalg.norm(cand.weights - probe)) / step
        obj = objective(cand)
        if mapping < tol:
            return cand, {"iterations": it, "mapping_norm": mapping, "converged": True}
        if obj > prev_obj:
            t = 1.0
            y = w.copy()
            prev_obj = objective(w)
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = ModelParams(cand.weights + ((t - 1.0) / t_next) * (cand.weights - w.weights), config.mode)
        w, t, prev_obj = cand, t_next, obj
        step *= 1.25
    return w, {"iterations": max_iter, "mapping_norm": mapping, "converged": False}
