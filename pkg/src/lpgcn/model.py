"""Single-layer GCN predictor, losses, activations and their constants.

Theory mode is the scalar model ``sigma(z . w)`` with +/-1 labels; experiment
mode widens ``w`` to a ``d x c`` matrix and scores classes with softmax
cross-entropy on ``sigma(z W)``. Everything here is plain numpy and serves as
the reference the compiled kernels are checked against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .graph import SparseMatrix

__all__ = [
    "ActivationKind",
    "Dataset",
    "LossKind",
    "Mode",
    "ModelParams",
    "SmoothnessConstants",
    "activation",
    "activation_constants",
    "grad_sample",
    "loss_constants",
    "loss_eval",
    "predict",
    "propagate",
    "smoothness_constants",
]


class _ParseMixin:
    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise InputError(f"unknown {cls.__name__} {text!r}; expected one of "
                         + ", ".join(k.value for k in cls))


class Mode(_ParseMixin, enum.Enum):
    THEORY = "theory"
    EXPERIMENT = "experiment"


class ActivationKind(_ParseMixin, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    IDENTITY = "identity"


class LossKind(_ParseMixin, enum.Enum):
    SQUARE = "square"
    LOGISTIC = "logistic"
    SOFTMAX_CE = "softmax_ce"


# integer codes shared with the kernels
MODE_CODES = {Mode.THEORY: 0, Mode.EXPERIMENT: 1}
LOSS_CODES = {LossKind.SQUARE: 0, LossKind.LOGISTIC: 1, LossKind.SOFTMAX_CE: 2}
ACT_CODES = {ActivationKind.SIGMOID: 0, ActivationKind.TANH: 1, ActivationKind.IDENTITY: 2}


def check_combination(mode, loss):
    mode, loss = Mode.parse(mode), LossKind.parse(loss)
    if mode is Mode.EXPERIMENT and loss is not LossKind.SOFTMAX_CE:
        raise InputError("experiment mode trains with softmax_ce loss")
    if mode is Mode.THEORY and loss is LossKind.SOFTMAX_CE:
        raise InputError("softmax_ce needs experiment mode (matrix weights)")
    return mode, loss


@dataclass(eq=False)
class Dataset:
    """A semi-supervised node classification instance.

    ``labels`` holds class indices (or +/-1 codes); ``train_idx`` and
    ``test_idx`` are disjoint node index arrays.
    """

    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    graph: SparseMatrix
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise InputError("features must be a 2-D array")
        if self.labels.shape != (n,):
            raise InputError(f"expected {n} labels, got {self.labels.shape[0]}")
        if self.graph.shape != (n, n):
            raise InputError(f"graph has shape {self.graph.shape}, features have {n} rows")
        for name in ("train_idx", "test_idx"):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise InputError(f"{name} holds a node outside [0, {n})")
            if np.unique(idx).size != idx.size:
                raise InputError(f"{name} has repeated nodes")
        if self.train_idx.size < 1:
            raise InputError("training set is empty")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise InputError("train and test masks overlap")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def m(self):
        return self.train_idx.size

    @property
    def n_classes(self):
        labels = np.unique(self.labels)
        if labels.size and labels.min() < 0:
            return labels.size
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def signed_labels(self):
        """Labels as +/-1 floats for theory mode (0/1 codes map to -1/+1)."""
        values = set(np.unique(self.labels).tolist())
        if values <= {-1, 1}:
            return self.labels.astype(np.float64)
        if values <= {0, 1}:
            return np.where(self.labels == 1, 1.0, -1.0)
        raise InputError(f"theory mode needs binary labels, got classes {sorted(values)}")

    def copy(self):
        return replace(self, features=self.features.copy(), labels=self.labels.copy(),
                       train_idx=self.train_idx.copy(), test_idx=self.test_idx.copy(),
                       meta=dict(self.meta))

    def normalized(self):
        """Copy with every feature row scaled to unit Euclidean norm (zero rows stay zero)."""
        norms = np.linalg.norm(self.features, axis=1, keepdims=True)
        x = np.divide(self.features, norms, out=np.zeros_like(self.features), where=norms > 0)
        return replace(self.copy(), features=x)


@dataclass(eq=False)
class ModelParams:
    weights: np.ndarray
    mode: Mode = Mode.THEORY

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        want = 1 if self.mode is Mode.THEORY else 2
        if self.weights.ndim != want:
            raise InputError(f"{self.mode.value} mode weights must be {want}-D, got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise InputError("weights must be finite")

    @classmethod
    def zeros(cls, d, mode=Mode.THEORY, n_classes=None):
        mode = Mode.parse(mode)
        shape = (d,) if mode is Mode.THEORY else (d, n_classes)
        return cls(np.zeros(shape), mode)

    def copy(self):
        return ModelParams(self.weights.copy(), self.mode)

    def as_matrix(self):
        return self.weights.reshape(self.weights.shape[0], -1)


@dataclass(frozen=True)
class SmoothnessConstants:
    a_l: float
    b_l: float
    a_sigma: float
    b_sigma: float
    B: float


# activations

def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def activation(act, x):
    """Value and first derivative of the activation at ``x``."""
    act = ActivationKind.parse(act)
    x = np.asarray(x, dtype=np.float64)
    if act is ActivationKind.SIGMOID:
        s = _sigmoid(x)
        return s, s * (1.0 - s)
    if act is ActivationKind.TANH:
        t = np.tanh(x)
        return t, 1.0 - t * t
    return x.copy(), np.ones_like(x)


# sup |sigma'| and sup |sigma''| over the real line
_ACT_CONSTANTS = {
    ActivationKind.SIGMOID: (0.25, 1.0 / (6.0 * math.sqrt(3.0))),
    ActivationKind.TANH: (1.0, 4.0 / (3.0 * math.sqrt(3.0))),
    ActivationKind.IDENTITY: (1.0, 0.0),
}


def activation_constants(act):
    """``(a_sigma, b_sigma)``: Lipschitz constants of the activation and its derivative."""
    return _ACT_CONSTANTS[ActivationKind.parse(act)]


# losses

def _softplus(t):
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def _softmax(f):
    f = np.asarray(f, dtype=np.float64)
    e = np.exp(f - f.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_signed(y):
    if not np.all(np.abs(np.asarray(y)) == 1):
        raise InputError("logistic loss expects labels coded as -1/+1")


def loss_eval(loss, y, f):
    """Loss value. Scalar losses take scalar ``f``; softmax_ce takes a score vector and a class index."""
    loss = LossKind.parse(loss)
    f = np.asarray(f, dtype=np.float64)
    if loss is LossKind.SQUARE:
        if f.ndim:
            raise InputError("square loss takes a scalar prediction")
        return float((y - f) ** 2)
    if loss is LossKind.LOGISTIC:
        if f.ndim:
            raise InputError("logistic loss takes a scalar prediction")
        _check_signed(y)
        return float(_softplus(-y * f))
    if f.ndim != 1:
        raise InputError("softmax_ce takes a vector of class scores")
    y = int(y)
    if not 0 <= y < f.size:
        raise InputError(f"class label {y} outside [0, {f.size})")
    m = f.max()
    return float(m + math.log(np.exp(f - m).sum()) - f[y])


def loss_derivative(loss, y, f):
    """d loss / d f (a vector for softmax_ce)."""
    loss = LossKind.parse(loss)
    f = np.asarray(f, dtype=np.float64)
    if loss is LossKind.SQUARE:
        return 2.0 * (f - y)
    if loss is LossKind.LOGISTIC:
        return -y * _sigmoid(-y * f)
    g = _softmax(f)
    g[int(y)] -= 1.0
    return g


def batch_losses(loss, y, f):
    """Per-row losses for predictions ``f`` (n,) or scores (n, c)."""
    loss = LossKind.parse(loss)
    f = np.asarray(f, dtype=np.float64)
    if loss is LossKind.SQUARE:
        return (np.asarray(y, dtype=np.float64) - f) ** 2
    if loss is LossKind.LOGISTIC:
        return _softplus(-np.asarray(y, dtype=np.float64) * f)
    m = f.max(axis=1)
    lse = m + np.log(np.exp(f - m[:, None]).sum(axis=1))
    return lse - f[np.arange(f.shape[0]), np.asarray(y, dtype=np.int64)]


# model

def propagate(filt, features):
    """``Z = g(L) X``: every node's filter-weighted neighbourhood aggregate."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != filt.n_cols:
        raise InputError(f"features of shape {x.shape} do not match a {filt.n_rows}x{filt.n_cols} filter")
    return np.ascontiguousarray(filt @ x)


def _scores(z, params):
    w = params.weights
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != w.shape[0]:
        raise InputError(f"feature length {z.shape[-1]} does not match weight length {w.shape[0]}")
    return z @ w


def predict(z_row, params, act=ActivationKind.SIGMOID):
    """``sigma(z . w)``, or the componentwise ``sigma(z W)`` score vector in experiment mode."""
    value, _ = activation(act, _scores(z_row, params))
    return float(value) if params.mode is Mode.THEORY else value


def predict_batch(z, params, act=ActivationKind.SIGMOID):
    value, _ = activation(act, _scores(z, params))
    return value


def grad_sample(z_row, params, y, loss, act=ActivationKind.SIGMOID):
    """Gradient of ``loss(y, f(z, w))`` with respect to the weights.

    Theory mode: ``l'(y, sigma(s)) sigma'(s) z`` with ``s = z . w``.
    Experiment mode: column ``k`` is ``dCE/df_k sigma'(s_k) z``.
    """
    check_combination(params.mode, loss)
    z = np.asarray(z_row, dtype=np.float64)
    f, df = activation(act, _scores(z, params))
    dl = loss_derivative(loss, y, f)
    if params.mode is Mode.THEORY:
        return float(dl * df) * z
    return np.outer(z, dl * df)


# constants

def loss_constants(loss, labels, f_lo, f_hi):
    """``(a_l, b_l)``: sup of |l'| and |l''| for predictions in ``[f_lo, f_hi]``.

    For softmax_ce the bounds hold in the Euclidean norm over score vectors
    and do not depend on the interval.
    """
    loss = LossKind.parse(loss)
    labels = np.unique(np.asarray(labels, dtype=np.float64))
    if loss is LossKind.SQUARE:
        a = 2.0 * max(max(abs(f_lo - y), abs(f_hi - y)) for y in labels)
        return a, 2.0
    if loss is LossKind.LOGISTIC:
        _check_signed(labels)
        margins = [y * f for y in labels for f in (f_lo, f_hi)]
        lo, hi = min(margins), max(margins)
        a = float(_sigmoid(-lo))
        t = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
        s = float(_sigmoid(t))
        return a, s * (1.0 - s)
    return math.sqrt(2.0), 0.5


def loss_at_zero(loss, act, labels, n_classes=None):
    """``B = max_y loss(y, sigma(0))``, the loss of the all-zero model."""
    loss = LossKind.parse(loss)
    s0 = float(activation(act, 0.0)[0])
    if loss is LossKind.SOFTMAX_CE:
        return math.log(n_classes)
    return max(loss_eval(loss, float(y), s0) for y in np.unique(labels))


def smoothness_constants(loss, act, dataset, radius, mode=None):
    """Assumption constants on the bounded prediction domain ``|z . w| <= radius``.

    ``radius`` is the bound on the pre-activation score; callers pass the
    projection radius times the largest aggregated-feature norm.
    """
    loss, act = LossKind.parse(loss), ActivationKind.parse(act)
    if radius <= 0:
        raise InputError("radius must be positive")
    if mode is None:
        mode = Mode.EXPERIMENT if loss is LossKind.SOFTMAX_CE else Mode.THEORY
    if Mode.parse(mode) is Mode.THEORY:
        signed = dataset.signed_labels()[dataset.train_idx]
    else:
        signed = dataset.labels[dataset.train_idx]
    a_sigma, b_sigma = activation_constants(act)
    f_lo, f_hi = (float(v) for v in activation(act, np.array([-radius, radius]))[0])
    a_l, b_l = loss_constants(loss, signed, f_lo, f_hi)
    B = loss_at_zero(loss, act, signed, n_classes=dataset.n_classes)
    return SmoothnessConstants(a_l=a_l, b_l=b_l, a_sigma=a_sigma, b_sigma=b_sigma, B=B)
