"""Per-epoch measurements: errors, generalization gap, parameter distance, sparsity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import LossKind, Mode, batch_losses, predict_batch

__all__ = [
    "EpochRecord",
    "RunMetrics",
    "error_rate",
    "generalization_gap",
    "param_distance",
    "sparsity_ratio",
]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_error: float
    test_error: float
    gen_gap: float
    param_distance: float
    sparsity_pct: float


@dataclass
class RunMetrics:
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def __len__(self):
        return len(self.rows)

    @property
    def final(self):
        return self.rows[-1] if self.rows else None


def param_distance(w, w2):
    """``sqrt(||w - w2||^2 / (||w||^2 + ||w2||^2))``, defined as 0 when both are zero."""
    a = np.asarray(w, dtype=np.float64).ravel()
    b = np.asarray(w2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"weight shapes differ: {np.shape(w)} vs {np.shape(w2)}")
    # hypot avoids underflow and overflow in the squared norms
    denom = math.hypot(*a, *b)
    if denom == 0.0:
        return 0.0
    return min(math.hypot(*(a - b)) / denom, math.sqrt(2.0))


def sparsity_ratio(w, eps=1e-6):
    """Percentage of weights with magnitude at most ``eps``."""
    if eps <= 0:
        raise InputError("eps must be positive")
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0:
        return 0.0
    return 100.0 * np.count_nonzero(np.abs(w) <= eps) / w.size


def error_rate(params, z, labels, idx, loss, act):
    """Mean error over nodes ``idx``: mean loss in theory mode, misclassification rate in experiment mode.

    ``labels`` must be +/-1 floats in theory mode and class indices otherwise.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise InputError("cannot evaluate an error over an empty mask")
    f = predict_batch(z[idx], params, act)
    if params.mode is Mode.THEORY:
        return float(batch_losses(loss, labels[idx], f).mean())
    return float(np.mean(np.argmax(f, axis=1) != labels[idx]))


def generalization_gap(params, dataset, z_matrix, loss, act):
    """``|train error - test error|`` for the dataset's masks."""
    loss = LossKind.parse(loss)
    labels = dataset.signed_labels() if params.mode is Mode.THEORY else dataset.labels
    tr = error_rate(params, z_matrix, labels, dataset.train_idx, loss, act)
    te = error_rate(params, z_matrix, labels, dataset.test_idx, loss, act)
    return abs(tr - te)
