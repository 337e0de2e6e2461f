"""Graph representation, convolution filters and spectral quantities.

A graph enters as an undirected edge list and becomes a symmetric 0/1 CSR
adjacency. One of four normalisation recipes turns it into the filter that
a one-layer GCN multiplies the features by; the filter's largest absolute
eigenvalue and the largest aggregated-feature norm feed the stability bound.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, InputError

__all__ = [
    "FilterKind",
    "SparseMatrix",
    "SpectralEstimate",
    "build_adjacency",
    "build_filter",
    "compute_ge",
    "ego_eigen_check",
    "ego_nodes",
    "ego_row",
    "read_edge_list",
    "spectral_radius",
]

DENSE_LIMIT = 200


class FilterKind(enum.Enum):
    UNNORMALIZED = "unnormalized"  # A + I
    NORMALIZED = "normalized"  # D^-1/2 A D^-1/2 + I
    RANDOM_WALK = "random_walk"  # D^-1 A + I
    AUGMENTED_NORMALIZED = "augmented_normalized"  # (D+I)^-1/2 (A+I) (D+I)^-1/2

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"aug": "augmented_normalized", "augmented": "augmented_normalized",
                   "rw": "random_walk", "randomwalk": "random_walk",
                   "augmentednormalized": "augmented_normalized"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key or kind.name.lower() == key:
                return kind
        raise InputError(f"unknown filter kind {text!r}; expected one of "
                         + ", ".join(k.value for k in cls))


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free, explicit-zero-free rows."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("row_offsets", "col_indices", "values"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def from_coo(cls, rows, cols, values, shape):
        """Assemble from triplets; duplicates are summed and zeros dropped."""
        n_rows, n_cols = int(shape[0]), int(shape[1])
        m = sp.coo_matrix((np.asarray(values, dtype=np.float64),
                           (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                          shape=(n_rows, n_cols)).tocsr()
        return cls._from_scipy(m)

    @classmethod
    def from_dense(cls, dense):
        return cls._from_scipy(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @classmethod
    def identity(cls, n):
        return cls._from_scipy(sp.identity(n, format="csr", dtype=np.float64))

    @classmethod
    def _from_scipy(cls, m):
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1],
                   m.indptr.astype(np.int64), m.indices.astype(np.int64),
                   m.data.astype(np.float64))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return int(self.values.size)

    def to_scipy(self):
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def to_dense(self):
        return self.to_scipy().toarray()

    def __matmul__(self, other):
        return self.to_scipy() @ np.asarray(other, dtype=np.float64)

    def row(self, i):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def transpose(self):
        return SparseMatrix._from_scipy(self.to_scipy().T)

    def is_symmetric(self):
        """Exact (bitwise) symmetry test."""
        if self.n_rows != self.n_cols:
            return False
        t = self.transpose()
        return (np.array_equal(self.row_offsets, t.row_offsets)
                and np.array_equal(self.col_indices, t.col_indices)
                and np.array_equal(self.values, t.values))

    def submatrix(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return SparseMatrix._from_scipy(self.to_scipy()[idx][:, idx])

    def degrees(self):
        return np.diff(self.row_offsets)

    def check(self):
        """Raise ``InputError`` if any structural invariant is broken."""
        ro, ci = self.row_offsets, self.col_indices
        if ro.size != self.n_rows + 1 or ro[0] != 0 or ro[-1] != self.values.size:
            raise InputError("row_offsets inconsistent with stored values")
        if np.any(np.diff(ro) < 0):
            raise InputError("row_offsets must be non-decreasing")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise InputError("column index out of range")
        for i in range(self.n_rows):
            if np.any(np.diff(ci[ro[i]:ro[i + 1]]) <= 0):
                raise InputError(f"row {i}: column indices not strictly increasing")
        if np.any(self.values == 0):
            raise InputError("explicit zero stored")


@dataclass(frozen=True)
class SpectralEstimate:
    lambda_max_abs: float
    iterations_used: int
    residual: float


def read_edge_list(path, n=None):
    """Parse a whitespace edge list; ``#`` lines and blank lines are skipped.

    With ``n`` given, node ids outside ``[0, n)`` are rejected with the
    offending line number.
    """
    path = Path(path)
    edges = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise InputError(f"{path.name} line {lineno}: expected two node ids, got {len(parts)} fields")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise InputError(f"{path.name} line {lineno}: node ids must be integers") from None
            if n is not None and not (0 <= u < n and 0 <= v < n):
                raise InputError(f"{path.name} line {lineno}: node id outside [0, {n})")
            edges.append((u, v))
    return edges


def build_adjacency(edges, n):
    """Symmetric 0/1 adjacency of an undirected graph.

    Orientation and repetition of the input pairs are ignored. Self-loop
    pairs are dropped, since every filter adds its own self term.
    """
    n = int(n)
    if n <= 0:
        raise InputError("graph must have at least one node")
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise InputError(f"edge ({bad[0]}, {bad[1]}) references a node outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    m = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.data[:] = 1.0
    return SparseMatrix._from_scipy(m)


def _inv_power(deg, exponent):
    out = np.zeros(deg.shape, dtype=np.float64)
    nz = deg > 0
    out[nz] = deg[nz] ** exponent
    return out


def build_filter(adj, kind):
    """Graph convolution filter of the requested kind.

    Zero-degree nodes get 0 in ``D^-1`` and ``D^-1/2``, so an isolated node
    keeps only its identity term.
    """
    kind = FilterKind.parse(kind)
    n = adj.n_rows
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(adj.row_offsets))
    cols = adj.col_indices
    deg = np.asarray(adj.to_scipy().sum(axis=1)).ravel()
    diag = np.arange(n, dtype=np.int64)

    if kind is FilterKind.UNNORMALIZED:
        vals = adj.values.copy()
        dvals = np.ones(n)
    elif kind is FilterKind.NORMALIZED:
        s = _inv_power(deg, -0.5)
        vals = adj.values * (s[rows] * s[cols])
        dvals = np.ones(n)
    elif kind is FilterKind.RANDOM_WALK:
        s = _inv_power(deg, -1.0)
        vals = adj.values * s[rows]
        dvals = np.ones(n)
    else:
        s = (deg + 1.0) ** -0.5
        vals = adj.values * (s[rows] * s[cols])
        dvals = s * s
    return SparseMatrix.from_coo(np.concatenate([rows, diag]), np.concatenate([cols, diag]),
                                 np.concatenate([vals, dvals]), (n, n))


def _reversible_weights(m):
    """Positive weights w with w_i m_ij == w_j m_ji, found by graph traversal.

    A random-walk filter D^-1 A + I is reversible with w = degree, and
    W^1/2 M W^-1/2 is then the symmetric normalized filter. Returns None if
    the matrix has no such weights.
    """
    n = m.n_rows
    csr = m.to_scipy()
    w = np.zeros(n)
    for root in range(n):
        if w[root]:
            continue
        w[root] = 1.0
        queue = deque([root])
        while queue:
            i = queue.popleft()
            cols, vals = m.row(i)
            for j, mij in zip(cols, vals):
                if j == i:
                    continue
                mji = csr[j, i]
                if mji == 0 or (mij > 0) != (mji > 0):
                    return None
                wj = w[i] * mij / mji
                if w[j] == 0:
                    w[j] = wj
                    queue.append(j)
                elif not math.isclose(w[j], wj, rel_tol=1e-10):
                    return None
    return w


def _symmetric_operator(filt):
    if filt.n_rows != filt.n_cols:
        raise InputError("spectral radius needs a square matrix")
    if filt.is_symmetric():
        return filt.to_scipy()
    w = _reversible_weights(filt)
    if w is None:
        raise InputError("filter is neither symmetric nor similar to a symmetric matrix by diagonal scaling")
    s = np.sqrt(w)
    m = sp.diags(s) @ filt.to_scipy() @ sp.diags(1.0 / s)
    return ((m + m.T) * 0.5).tocsr()


def spectral_radius(filt, tol=1e-8, max_iter=10_000, seed=0):
    """Largest absolute eigenvalue by power iteration on the squared operator.

    Iterating with M^2 makes both spectral ends compete on magnitude, so a
    negative extreme is found as readily as a positive one and a +/- pair of
    equal magnitude does not stall the iteration. The reported residual
    ``||M^2 x - mu x|| / (2 sqrt(mu))`` bounds the error of the estimate.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` iterations.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    m = _symmetric_operator(filt)
    n = m.shape[0]
    if n == 0:
        return SpectralEstimate(0.0, 0, 0.0)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    x /= np.linalg.norm(x)
    rho, resid = 0.0, math.inf
    for it in range(1, max_iter + 1):
        mx = m @ x
        mu = float(mx @ mx)
        if mu == 0.0:
            # x lies in the null space; restart is pointless only if M == 0
            if m.count_nonzero() == 0:
                return SpectralEstimate(0.0, it, 0.0)
            x = rng.uniform(-1.0, 1.0, n)
            x /= np.linalg.norm(x)
            continue
        y = m @ mx
        rho = math.sqrt(mu)
        resid = float(np.linalg.norm(y - mu * x)) / (2.0 * rho)
        if resid <= tol:
            return SpectralEstimate(rho, it, resid)
        x = y / np.linalg.norm(y)
    raise ConvergenceError(f"power iteration did not reach tol={tol:g} in {max_iter} iterations",
                           estimate=rho, residual=resid, iterations=max_iter)


def ego_row(filt, node):
    """The node's filter row as ``{column: weight}``; its keys are the ego-graph nodes."""
    node = int(node)
    if not 0 <= node < filt.n_rows:
        raise InputError(f"node {node} out of range [0, {filt.n_rows})")
    cols, vals = filt.row(node)
    return {int(c): float(v) for c, v in zip(cols, vals)}


def ego_nodes(filt, node):
    return np.array(sorted(ego_row(filt, node)), dtype=np.int64)


def compute_ge(filt, features):
    """Largest Euclidean norm of a filter-aggregated feature row."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != filt.n_cols:
        raise InputError(f"features of shape {x.shape} do not match a filter with {filt.n_cols} columns")
    z = filt @ x
    return float(np.sqrt((z * z).sum(axis=1)).max()) if z.size else 0.0


def _dense_max_abs_eig(dense):
    if dense.size == 0:
        return 0.0
    if np.array_equal(dense, dense.T):
        ev = np.linalg.eigvalsh(dense)
    else:
        ev = np.linalg.eigvals(dense)
    return float(np.abs(ev).max())


def ego_eigen_check(adj, kind, node):
    """Compare the ego-graph filter's spectral radius with the full filter's.

    The ego-graph filter is the principal submatrix of the full filter on the
    node and its 1-hop neighbours. Returns ``(ego, full)``.
    """
    if adj.n_rows > DENSE_LIMIT:
        raise InputError(f"dense ego-graph check limited to {DENSE_LIMIT} nodes, got {adj.n_rows}")
    filt = build_filter(adj, kind)
    dense = filt.to_dense()
    idx = ego_nodes(filt, node)
    return _dense_max_abs_eig(dense[np.ix_(idx, idx)]), _dense_max_abs_eig(dense)
