"""Dataset files, manifests and the stochastic-block-model generator.

A dataset directory holds five plain files:

``edges.txt``
    one whitespace-separated node pair per line (``#`` comments allowed).
``features.csv``
    headerless CSV, one row of ``d`` floats per node.
``labels.txt``
    one integer class label per line, one line per node.
``train_mask.txt`` / ``test_mask.txt``
    one node index per line.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import build_adjacency, read_edge_list
from .model import Dataset

__all__ = ["DatasetManifest", "load_dataset", "make_synthetic", "save_dataset"]

FILES = ("edges.txt", "features.csv", "labels.txt", "train_mask.txt", "test_mask.txt")


@dataclass(frozen=True)
class DatasetManifest:
    n: int
    d: int
    classes: int
    edges: int
    train_size: int
    test_size: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _read_features(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                raise InputError(f"{path.name} line {lineno}: empty row")
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path.name} line {lineno}: non-numeric value") from None
            if rows and len(values) != len(rows[0]):
                raise InputError(f"{path.name} line {lineno}: expected {len(rows[0])} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise InputError(f"{path.name}: no feature rows")
    return np.array(rows, dtype=np.float64)


def _read_ints(path, what, lo=None, hi=None):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                value = int(text)
            except ValueError:
                raise InputError(f"{path.name} line {lineno}: expected one integer {what}, got {text!r}") from None
            if (lo is not None and value < lo) or (hi is not None and value >= hi):
                raise InputError(f"{path.name} line {lineno}: {what} {value} outside [{lo}, {hi})")
            out.append(value)
    return np.array(out, dtype=np.int64)


def load_dataset(directory, normalize=False):
    """Read a dataset directory.

    Parameters
    ----------
    directory : path
    normalize : bool
        Scale every feature row to unit Euclidean norm.

    Returns
    -------
    (Dataset, DatasetManifest)
        ``manifest.edges`` counts records in ``edges.txt`` as listed, before
        symmetrisation and de-duplication.
    """
    root = Path(directory)
    if not root.is_dir():
        raise InputError(f"dataset directory {root} does not exist")
    for name in FILES:
        if not (root / name).is_file():
            raise InputError(f"missing dataset file {root / name}")
    features = _read_features(root / "features.csv")
    n = features.shape[0]
    labels = _read_ints(root / "labels.txt", "label")
    if labels.size != n:
        raise InputError(f"labels.txt has {labels.size} labels, features.csv has {n} rows")
    train = _read_ints(root / "train_mask.txt", "node index", 0, n)
    test = _read_ints(root / "test_mask.txt", "node index", 0, n)
    edges = read_edge_list(root / "edges.txt", n=n)
    graph = build_adjacency(edges, n)
    ds = Dataset(features, labels, train, test, graph, meta={"source": str(root)})
    if normalize:
        ds = ds.normalized()
    manifest = DatasetManifest(n=n, d=features.shape[1], classes=int(np.unique(labels).size),
                               edges=len(edges),
                               train_size=int(train.size), test_size=int(test.size))
    return ds, manifest


def save_dataset(dataset, directory):
    """Write ``dataset`` in the directory format read by :func:`load_dataset`."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    coo = dataset.graph.to_scipy().tocoo()
    upper = coo.row < coo.col
    with open(root / "edges.txt", "w") as fh:
        for u, v in zip(coo.row[upper], coo.col[upper]):
            fh.write(f"{u} {v}\n")
    with open(root / "features.csv", "w") as fh:
        for row in dataset.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    for name, values in (("labels.txt", dataset.labels), ("train_mask.txt", dataset.train_idx),
                         ("test_mask.txt", dataset.test_idx)):
        with open(root / name, "w") as fh:
            fh.writelines(f"{int(v)}\n" for v in values)
    return root


def make_synthetic(n, d, classes, edge_prob, homophily, seed, *, informative=None, separation=1.0,
                   noise=1.0, features="gaussian", density=0.02, train_size=None, test_size=None):
    """Stochastic block model graph with class-dependent features.

    Nodes in the same class connect with probability ``edge_prob``; nodes in
    different classes with ``edge_prob * (1 - homophily)``. Only the first
    ``informative`` feature dimensions (default ``d // 5``, at least 1)
    depend on the class.

    ``features="gaussian"``
        class means with scale ``separation`` on the informative dimensions
        (zero elsewhere) plus ``noise`` times standard Gaussian noise.
    ``features="binary"``
        bag-of-words style 0/1 features: dimension ``j`` is on with
        probability ``density``, tilted per class by
        ``exp(separation * g)`` (``g`` standard normal) on the informative
        dimensions.

    ``train_size`` defaults to ``round(0.3 n)``; the test set is every other
    node unless ``test_size`` is given.
    """
    if n <= 0 or d <= 0:
        raise InputError("n and d must be positive")
    if classes < 1 or classes > n:
        raise InputError("classes must lie in [1, n]")
    if not (0.0 <= edge_prob <= 1.0 and 0.0 <= homophily <= 1.0):
        raise InputError("edge_prob and homophily must lie in [0, 1]")
    if features not in ("gaussian", "binary"):
        raise InputError("features must be 'gaussian' or 'binary'")
    if not 0.0 < density <= 1.0:
        raise InputError("density must lie in (0, 1]")
    informative = max(1, d // 5) if informative is None else informative
    if not 1 <= informative <= d:
        raise InputError("informative must lie in [1, d]")
    train_size = int(round(0.3 * n)) if train_size is None else train_size
    if not 1 <= train_size <= n:
        raise InputError("train_size must lie in [1, n]")
    test_size = n - train_size if test_size is None else test_size
    if not 0 <= test_size <= n - train_size:
        raise InputError("test_size must lie in [0, n - train_size]")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    p_in, p_out = edge_prob, edge_prob * (1.0 - homophily)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    tilt = separation * rng.standard_normal((classes, informative))
    if features == "gaussian":
        means = np.zeros((classes, d))
        means[:, :informative] = tilt
        x = means[labels] + noise * rng.standard_normal((n, d))
    else:
        rates = np.full((classes, d), density)
        rates[:, :informative] = np.minimum(1.0, density * np.exp(tilt))
        x = (rng.random((n, d)) < rates[labels]).astype(np.float64)
    order = rng.permutation(n)
    train = np.sort(order[:train_size])
    test = np.sort(order[train_size:train_size + test_size])
    graph = build_adjacency(edges, n)
    meta = {"source": "synthetic", "seed": seed, "edge_prob": edge_prob, "homophily": homophily,
            "features": features}
    return Dataset(x, labels, train, test, graph, meta=meta)
