"""Experiment configuration files, the sweep runner and plot-data emission.

Config files are flat ``key = value`` text; ``#`` starts a comment. Lists
are comma-separated. Unknown keys are rejected.

Example::

    # synthetic SBM, two p values, default filter
    synth_n = 200
    synth_d = 40
    output_dir = out
    p_grid = 1.001, 2
    epochs = 50
    repeats = 3
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _backend
from .bounds import BoundRow, evaluate_bounds
from .data import DatasetManifest, load_dataset, make_synthetic
from .errors import InputError
from .graph import FilterKind, build_filter, spectral_radius
from .model import Mode
from .sgd import TrainConfig
from .stability import read_metrics_csv, sweep, write_metrics_csv

__all__ = ["ExperimentConfig", "PLOT_KINDS", "emit_plotdata", "load_config", "parse_config", "run_experiment"]

PLOT_KINDS = {"gap": "gen_gap", "distance": "param_distance", "sparsity": "sparsity_pct"}
BOUND_COLUMNS = tuple(f.name for f in fields(BoundRow))


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt(conv):
    return lambda text: None if text.strip().lower() in ("", "none") else conv(text)


# key -> (attribute, converter)
_KEYS = {
    "dataset_dir": ("dataset_dir", str),
    "output_dir": ("output_dir", str),
    "p": ("p", float),
    "lambda": ("lam", float),
    "eta": ("eta", float),
    "lambda_t": ("lambda_t", _opt(float)),
    "epochs": ("epochs", int),
    "loss": ("loss", _opt(str)),
    "activation": ("activation", _opt(str)),
    "filter_kind": ("filter_kind", str),
    "seed": ("seed", int),
    "prox_tol": ("prox_tol", float),
    "record_every": ("record_every", _opt(int)),
    "mode": ("mode", str),
    "sampling": ("sampling", str),
    "init": ("init", str),
    "init_scale": ("init_scale", float),
    "p_grid": ("p_grid", _float_list),
    "filter_grid": ("filter_grid", lambda t: [s.strip() for s in t.split(",") if s.strip()]),
    "repeats": ("repeats", int),
    "delta": ("delta", float),
    "eps_sparsity": ("eps_sparsity", float),
    "normalize_features": ("normalize_features", _bool),
    "threads": ("threads", _opt(int)),
    "perturb_index": ("perturb_index", _opt(int)),
    "synth_n": ("synth_n", int),
    "synth_d": ("synth_d", int),
    "synth_classes": ("synth_classes", int),
    "synth_edge_prob": ("synth_edge_prob", float),
    "synth_homophily": ("synth_homophily", float),
    "synth_seed": ("synth_seed", int),
    "synth_informative": ("synth_informative", _opt(int)),
    "synth_separation": ("synth_separation", float),
    "synth_features": ("synth_features", str),
    "synth_density": ("synth_density", float),
}


@dataclass
class ExperimentConfig:
    """Run settings. Without ``dataset_dir`` a synthetic SBM dataset is generated."""

    dataset_dir: str | None = None
    output_dir: str = "lpgcn_out"
    p: float = 2.0
    lam: float = 1e-3
    eta: float = 1.0
    lambda_t: float | None = None
    epochs: int = 200
    loss: str | None = None
    activation: str | None = None
    filter_kind: str = "augmented_normalized"
    seed: int = 0
    prox_tol: float = 1e-12
    record_every: int | None = None
    mode: str = "theory"
    sampling: str = "uniform"
    init: str = "zeros"
    init_scale: float = 0.01
    p_grid: list = field(default_factory=list)
    filter_grid: list = field(default_factory=list)
    repeats: int = 1
    delta: float = 0.05
    eps_sparsity: float = 1e-6
    normalize_features: bool = False
    threads: int | None = None
    perturb_index: int | None = None
    synth_n: int = 400
    synth_d: int = 500
    synth_classes: int = 2
    synth_edge_prob: float = 0.05
    synth_homophily: float = 0.3
    synth_seed: int = 0
    synth_informative: int | None = None
    synth_separation: float = 1.0
    synth_features: str = "binary"
    synth_density: float = 0.02

    def __post_init__(self):
        if not self.p_grid:
            self.p_grid = [self.p]
        if not self.filter_grid:
            self.filter_grid = [self.filter_kind]
        for p in self.p_grid:
            if not 1.0 < p <= 2.0:
                raise InputError(f"p must lie in (1,2], got {p}")
        self.filter_grid = [FilterKind.parse(f).value for f in self.filter_grid]
        if self.repeats < 1:
            raise InputError("repeats must be at least 1")
        if not 0.0 < self.delta < 1.0:
            raise InputError("delta must lie in (0,1)")
        self.train_config()  # validates the optimiser fields

    def train_config(self, **overrides):
        values = dict(p=self.p_grid[0], lam=self.lam, eta=self.eta, lambda_t=self.lambda_t, epochs=self.epochs,
                      loss=self.loss, activation=self.activation, filter_kind=self.filter_grid[0], seed=self.seed,
                      prox_tol=self.prox_tol, record_every=self.record_every, mode=self.mode,
                      sampling=self.sampling, init=self.init, init_scale=self.init_scale,
                      eps_sparsity=self.eps_sparsity)
        values.update(overrides)
        return TrainConfig(**values)

    def load_data(self):
        """``(Dataset, DatasetManifest)`` from ``dataset_dir`` or the synthetic generator."""
        if self.dataset_dir:
            return load_dataset(self.dataset_dir, normalize=self.normalize_features)
        ds = make_synthetic(self.synth_n, self.synth_d, self.synth_classes, self.synth_edge_prob,
                            self.synth_homophily, self.synth_seed, informative=self.synth_informative,
                            separation=self.synth_separation, features=self.synth_features,
                            density=self.synth_density)
        if self.normalize_features:
            ds = ds.normalized()
        manifest = DatasetManifest(n=ds.n, d=ds.d, classes=int(np.unique(ds.labels).size),
                                   edges=int(ds.graph.nnz // 2), train_size=ds.m, test_size=int(ds.test_idx.size))
        return ds, manifest

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_config(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source} line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise InputError(f"{source} line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(value)
        except ValueError:
            raise InputError(f"{source} line {lineno}: bad value {value!r} for {key}") from None
    return ExperimentConfig(**values)


def load_config(path, **overrides):
    """Read a config file; non-``None`` keyword overrides replace file values."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file {path} does not exist")
    cfg = parse_config(path.read_text(), source=path.name)
    changes = {k: v for k, v in overrides.items() if v is not None}
    if changes:
        cfg = ExperimentConfig(**{**cfg.as_dict(), **changes})
    return cfg


def write_bounds_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BOUND_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(row, c) for c in BOUND_COLUMNS)])
    return path


def bound_rows(dataset, cfg):
    rows = []
    for f in cfg.filter_grid:
        filt = build_filter(dataset.graph, f)
        spec = spectral_radius(filt)
        for p in cfg.p_grid:
            rows.append(evaluate_bounds(dataset, cfg.train_config(p=p, filter_kind=f), cfg.delta,
                                        filt=filt, spectral=spec))
    return rows


def run_experiment(config, **overrides):
    """Run the configured sweep and write ``metrics.csv``, ``bounds.csv`` and ``manifest.json``.

    Parameters
    ----------
    config : path or ExperimentConfig
    overrides
        ``seed``, ``normalize_features``, ``eps_sparsity``, ``threads`` or
        ``output_dir``; ``None`` values are ignored.

    Returns
    -------
    dict mapping output kind to path.
    """
    if isinstance(config, ExperimentConfig):
        changes = {k: v for k, v in overrides.items() if v is not None}
        cfg = ExperimentConfig(**{**config.as_dict(), **changes}) if changes else config
    else:
        cfg = load_config(config, **overrides)
    dataset, manifest = cfg.load_data()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.train_config()
    result = sweep(dataset, base, cfg.p_grid, cfg.filter_grid, cfg.repeats, threads=cfg.threads,
                   perturb_index=cfg.perturb_index)
    paths = {"metrics": out / "metrics.csv", "bounds": out / "bounds.csv", "manifest": out / "manifest.json"}
    write_metrics_csv(paths["metrics"], result.rows())
    write_bounds_csv(paths["bounds"], bound_rows(dataset, cfg))
    summary = {
        "config": {k: v for k, v in cfg.as_dict().items() if k != "threads"},
        "train_config": {"loss": base.loss.value, "activation": base.activation.value, "mode": base.mode.value,
                         "lambda_t": base.prox_scale},
        "dataset": manifest.to_dict(),
        "backend": _backend.active.BACKEND,
        "cells": [vars(s) for s in result.summary()],
        "outputs": {k: p.name for k, p in paths.items()},
    }
    paths["manifest"].write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    return paths


def _json_default(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, Mode):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def emit_plotdata(metrics_csv, kind, out=None):
    """Aggregate a metrics CSV over repeats for plotting.

    ``gap`` and ``distance`` write long format ``epoch,series,mean,std`` with
    one series per (filter, p). ``sparsity`` writes a filter-by-p table of
    the mean final-epoch sparsity percentage.
    """
    if kind not in PLOT_KINDS:
        raise InputError(f"kind must be one of {sorted(PLOT_KINDS)}")
    metrics_csv = Path(metrics_csv)
    if not metrics_csv.is_file():
        raise InputError(f"metrics file {metrics_csv} does not exist")
    rows = read_metrics_csv(metrics_csv)
    out = Path(out) if out is not None else metrics_csv.with_name(f"plot_{kind}.csv")
    column = PLOT_KINDS[kind]
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if kind == "sparsity":
            _sparsity_table(writer, rows)
        else:
            writer.writerow(("epoch", "series", "mean", "std"))
            groups = defaultdict(list)
            for r in rows:
                groups[(r["filter"], r["p"], r["epoch"])].append(r[column])
            for (f, p, epoch) in sorted(groups):
                mean, std = _mean_std(groups[(f, p, epoch)])
                writer.writerow((epoch, f"{f} p={p:g}", repr(mean), repr(std)))
    return out


def _sparsity_table(writer, rows):
    last = defaultdict(int)
    for r in rows:
        last[r["run_id"]] = max(last[r["run_id"]], r["epoch"])
    cells = defaultdict(list)
    for r in rows:
        if r["epoch"] == last[r["run_id"]]:
            cells[(r["filter"], r["p"])].append(r["sparsity_pct"])
    filters = sorted({f for f, _ in cells})
    ps = sorted({p for _, p in cells})
    writer.writerow(["filter"] + [f"p={p:g}" for p in ps])
    for f in filters:
        vals = [cells.get((f, p)) for p in ps]
        writer.writerow([f] + ["" if v is None else f"{_mean_std(v)[0]:.2f}" for v in vals])
