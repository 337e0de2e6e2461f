"""Twin training on datasets that differ in one training point, and grid sweeps.

A twin run trains on ``D`` and on ``D^i`` (node ``i`` given the feature row
and label of another training node) with one shared index sequence and one
shared initialisation, then measures how far apart the two weight
trajectories drift.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .graph import FilterKind, build_filter
from .metrics import RunMetrics, generalization_gap, param_distance, sparsity_ratio
from .model import propagate
from .sgd import _streams, initial_weights, prepare, sample_sequence, train

__all__ = [
    "CellSummary",
    "METRIC_COLUMNS",
    "Replacement",
    "SweepResult",
    "TrainedRun",
    "TwinRun",
    "generalization_gap",
    "param_distance",
    "perturb_dataset",
    "read_metrics_csv",
    "sparsity_ratio",
    "sweep",
    "twin_train",
    "write_metrics_csv",
]

METRIC_COLUMNS = ("run_id", "p", "filter", "epoch", "train_error", "test_error", "gen_gap",
                  "param_distance", "sparsity_pct", "seed")


@dataclass(frozen=True)
class Replacement:
    index: int
    source: int
    features: np.ndarray
    label: int


@dataclass
class TrainedRun:
    params: object
    trajectory: object
    metrics: RunMetrics


@dataclass
class TwinRun:
    run_a: TrainedRun
    run_b: TrainedRun
    perturbed_index: int
    replacement: Replacement

    @property
    def distances(self):
        return self.run_a.metrics.column("param_distance")


def perturb_dataset(dataset, i, seed, source=None):
    """Copy of ``dataset`` with training node ``i`` overwritten by another training node.

    The replacement node is drawn uniformly from the other training nodes
    (or given as ``source``). Only the feature row and label of ``i`` change;
    the graph is shared.

    Returns
    -------
    (Dataset, Replacement)
    """
    train_idx = dataset.train_idx
    if i not in set(train_idx.tolist()):
        raise InputError(f"node {i} is not in the training mask")
    others = train_idx[train_idx != i]
    if others.size == 0:
        raise InputError("training mask has a single node; no distinct replacement exists")
    if source is None:
        source = int(np.random.default_rng(seed).choice(others))
    elif source not in set(others.tolist()):
        raise InputError(f"replacement source {source} must be a training node other than {i}")
    out = dataset.copy()
    out.features[i] = dataset.features[source]
    out.labels[i] = dataset.labels[source]
    record = Replacement(index=int(i), source=int(source), features=dataset.features[source].copy(),
                         label=int(dataset.labels[source]))
    return out, record


def _twin(dataset, config, i, z_a=None, filt=None, source=None):
    perturbed, record = perturb_dataset(dataset, i, config.seed, source=source)
    if filt is None:
        filt = build_filter(dataset.graph, config.filter_kind)
    prob_a = prepare(dataset, config, z=z_a if z_a is not None else propagate(filt, dataset.features))
    prob_b = prepare(perturbed, config, z=propagate(filt, perturbed.features))
    sample_rng, init_rng = _streams(config.seed)
    seq = sample_sequence(sample_rng, dataset.train_idx, config.epochs, config.sampling)
    init = initial_weights(config, prob_a.z.shape[1], prob_a.n_classes, init_rng)
    pa, ta, ma = train(dataset, config, index_sequence=seq, init=init, problem=prob_a)
    pb, tb, mb = train(perturbed, config, index_sequence=seq, init=init, problem=prob_b)
    dist = [param_distance(wa, wb) for wa, wb in zip(ta.epoch_weights, tb.epoch_weights)]
    ma.rows = [replace(row, param_distance=d) for row, d in zip(ma.rows, dist)]
    mb.rows = [replace(row, param_distance=d) for row, d in zip(mb.rows, dist)]
    return TwinRun(TrainedRun(pa, ta, ma), TrainedRun(pb, tb, mb), int(i), record)


def twin_train(dataset, config, i, *, source=None):
    """Train on ``D`` and ``D^i`` with a shared sample sequence and initialisation.

    ``param_distance`` in both runs' metrics holds the per-epoch distance
    between the two weight vectors.
    """
    return _twin(dataset, config, i, source=source)


@dataclass(frozen=True)
class CellSummary:
    p: float
    filter: str
    repeats: int
    gap_mean: float
    gap_std: float
    distance_mean: float
    distance_std: float
    sparsity_mean: float
    sparsity_std: float


@dataclass
class SweepResult:
    runs: dict
    seeds: dict

    def cells(self):
        keys = []
        for p, f, _ in self.runs:
            if (p, f) not in keys:
                keys.append((p, f))
        return keys

    def final(self, p, filt, column):
        """Final-epoch values of ``column`` over the repeats of one cell."""
        filt = FilterKind.parse(filt).value
        return np.array([getattr(run.run_a.metrics.final, column)
                         for (pp, ff, _), run in self.runs.items() if pp == p and ff == filt])

    def summary(self):
        out = []
        for p, f in self.cells():
            gap, dist, sp = (self.final(p, f, c) for c in ("gen_gap", "param_distance", "sparsity_pct"))
            out.append(CellSummary(p, f, gap.size, float(gap.mean()), float(gap.std()), float(dist.mean()),
                                   float(dist.std()), float(sp.mean()), float(sp.std())))
        return out

    def rows(self):
        """Per-epoch metric rows of every run on ``D`` in the CSV column order."""
        for (p, f, r), run in self.runs.items():
            run_id = f"{f}_p{p:g}_r{r}"
            for row in run.run_a.metrics.rows:
                yield (run_id, p, f, row.epoch, row.train_error, row.test_error, row.gen_gap,
                       row.param_distance, row.sparsity_pct, self.seeds[(p, f, r)])


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("LPGCN_THREADS", "1") or 1)
    if threads < 1:
        raise InputError("threads must be at least 1")
    return threads


def sweep(dataset, base, p_grid, filter_grid, repeats, *, threads=None, perturb_index=None):
    """Twin runs for every (p, filter, repeat) cell.

    Repeat ``r`` uses seed ``base.seed + r`` for sampling, initialisation and
    the choice of perturbed node (shared by all cells of that repeat).
    Cells run on a thread pool; results are assembled in grid order, so the
    outcome does not depend on ``threads``.
    """
    if not p_grid or not filter_grid:
        raise InputError("p_grid and filter_grid must be non-empty")
    if repeats < 1:
        raise InputError("repeats must be at least 1")
    filters = [FilterKind.parse(f) for f in filter_grid]
    prepared = {}
    for f in filters:
        filt = build_filter(dataset.graph, f)
        prepared[f] = (filt, propagate(filt, dataset.features))
    tasks = []
    for f in filters:
        for p in p_grid:
            for r in range(repeats):
                seed = base.seed + r
                cfg = base.with_(p=float(p), filter_kind=f, seed=seed)
                if perturb_index is None:
                    i = int(np.random.default_rng([seed, 7]).choice(dataset.train_idx))
                else:
                    i = perturb_index
                tasks.append(((float(p), f.value, r), cfg, i))

    def work(task):
        _, cfg, i = task
        filt, z = prepared[cfg.filter_kind]
        return _twin(dataset, cfg, i, z_a=z, filt=filt)

    n_threads = _threads(threads)
    if n_threads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, tasks))
    runs = {key: res for (key, _, _), res in zip(tasks, results)}
    seeds = {key: cfg.seed for key, cfg, _ in tasks}
    return SweepResult(runs, seeds)


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_metrics_csv(path):
    """Parse a metrics CSV into a list of dicts with numeric fields converted."""
    numeric = {"p": float, "epoch": int, "train_error": float, "test_error": float, "gen_gap": float,
               "param_distance": float, "sparsity_pct": float, "seed": int}
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRIC_COLUMNS:
            raise InputError(f"{path}: expected header {','.join(METRIC_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(METRIC_COLUMNS):
                raise InputError(f"{path} line {lineno}: expected {len(METRIC_COLUMNS)} fields, got {len(row)}")
            rec = dict(zip(METRIC_COLUMNS, row))
            try:
                for k, conv in numeric.items():
                    rec[k] = conv(rec[k])
            except ValueError:
                raise InputError(f"{path} line {lineno}: malformed number") from None
            out.append(rec)
    return out
