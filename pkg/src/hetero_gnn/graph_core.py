"""Sparse graph container, adjacency normalizations, homophily and splits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import (
    InvalidMatrix,
    ShapeError,
    SplitError,
    UndefinedRatio,
    ValidationError,
)

# percentages as integers so floor() is exact
SPLIT_PERCENT = (48, 32)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _canonical_csr(m: sp.spmatrix, dtype) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=dtype)
    m.sum_duplicates()
    m.sort_indices()
    m.indptr = m.indptr.astype(np.int32)
    m.indices = m.indices.astype(np.int32)
    return m


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph with dense node features and labels.

    The adjacency is stored symmetrically in CSR form with sorted, unique
    column indices and no self-loops.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        adj = self.adjacency
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ShapeError(f"adjacency must be square, got {adj.shape}")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ShapeError(f"features must have {n} rows, got {self.features.shape}")
        if self.labels.shape != (n,):
            raise ShapeError(f"labels must have shape ({n},), got {self.labels.shape}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValidationError("labels out of range [0, class_count)")
        if (adj != adj.T).nnz:
            raise ValidationError("adjacency is not symmetric")
        if adj.diagonal().any():
            raise ValidationError("adjacency must not contain self-loops")
        object.__setattr__(self, "features", _frozen(np.asarray(self.features, dtype=np.float64)))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64)))
        for arr in (adj.data, adj.indices, adj.indptr):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n_nodes, edges, features, labels, class_count=None) -> "Graph":
        """Build a graph from an (src, dst) edge list; edges are symmetrized
        and deduplicated, self-loops dropped."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n_nodes):
            raise ValidationError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sp.coo_matrix((np.ones(len(src), dtype=bool), (src, dst)), shape=(n_nodes, n_nodes))
        adj = _canonical_csr(adj, bool)
        adj.data[:] = True
        labels = np.asarray(labels, dtype=np.int64)
        if class_count is None:
            class_count = int(labels.max()) + 1 if len(labels) else 0
        return cls(adj, np.asarray(features, dtype=np.float64), labels, int(class_count))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        """Undirected edge count (each stored pair counted once)."""
        return self.adjacency.nnz // 2

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u < v."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        return np.stack([coo.row, coo.col], axis=1).astype(np.int64)

    def permute(self, perm) -> "Graph":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        adj = self.adjacency[perm][:, perm]
        return Graph(
            _canonical_csr(adj, bool),
            self.features[perm],
            self.labels[perm],
            self.class_count,
        )


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    values: sp.csr_matrix
    kind: Literal["symmetric", "row"]

    @property
    def shape(self):
        return self.values.shape

    def transpose(self) -> "NormalizedAdjacency":
        if self.kind == "symmetric":
            return self
        return NormalizedAdjacency(_canonical_csr(self.values.T, np.float64), self.kind)

    def toarray(self) -> np.ndarray:
        return self.values.toarray()


@dataclass(frozen=True)
class SplitMasks:
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        for name in ("train_mask", "val_mask", "test_mask"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=bool)))


def normalize_sym(graph: Graph) -> NormalizedAdjacency:
    """D^-1/2 (A + I) D^-1/2 with degrees taken after adding self-loops."""
    n = graph.n_nodes
    a = graph.adjacency.astype(np.float64) + sp.identity(n, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    a = _canonical_csr(a, np.float64)
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    a.data = inv_sqrt[rows] * a.data * inv_sqrt[a.indices]
    return NormalizedAdjacency(a, "symmetric")


def row_normalize(matrix) -> NormalizedAdjacency:
    """Divide every nonzero row by its sum; all-zero rows stay zero."""
    m = _canonical_csr(sp.csr_matrix(matrix), np.float64)
    if m.nnz and m.data.min() < 0:
        raise InvalidMatrix("row_normalize requires non-negative entries")
    sums = np.asarray(m.sum(axis=1)).ravel()
    scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    m.data = m.data * scale[rows]
    return NormalizedAdjacency(m, "row")


def homophily_ratio(graph: Graph) -> float:
    """Fraction of undirected edges joining same-label endpoints."""
    edges = graph.edge_array()
    if len(edges) == 0:
        raise UndefinedRatio("homophily is undefined for a graph without edges")
    y = graph.labels
    return float(np.mean(y[edges[:, 0]] == y[edges[:, 1]]))


def edge_homophily(adjacency: sp.spmatrix, labels: np.ndarray) -> float:
    """Homophily of an arbitrary (possibly weighted) support, diagonal ignored."""
    coo = sp.triu(sp.csr_matrix(adjacency), k=1).tocoo()
    keep = coo.data != 0
    if not keep.any():
        raise UndefinedRatio("support has no off-diagonal entries")
    return float(np.mean(labels[coo.row[keep]] == labels[coo.col[keep]]))


def spmm(adj: NormalizedAdjacency | sp.csr_matrix, dense: np.ndarray) -> np.ndarray:
    """Sparse-dense product with a fixed accumulation order."""
    m = adj.values if isinstance(adj, NormalizedAdjacency) else adj
    dense = np.ascontiguousarray(dense, dtype=np.float64)
    if dense.ndim != 2 or m.shape[1] != dense.shape[0]:
        raise ShapeError(f"cannot multiply {m.shape} by {dense.shape}")
    m = _canonical_csr(m, np.float64) if m.indptr.dtype != np.int32 else m
    return kernels.spmm(m.indptr, m.indices, np.ascontiguousarray(m.data, dtype=np.float64), dense)


def stratified_split(graph: Graph, seed: int) -> SplitMasks:
    """Per-class 48/32/20 split; train=floor(.48 n_c), val=floor(.32 n_c)."""
    rng = np.random.default_rng(seed)
    n = graph.n_nodes
    masks = [np.zeros(n, dtype=bool) for _ in range(3)]
    for cls in range(graph.class_count):
        idx = np.flatnonzero(graph.labels == cls)
        if len(idx) == 0:
            continue
        if len(idx) < 3:
            raise SplitError(f"class {cls} has {len(idx)} nodes; need at least 3")
        idx = rng.permutation(idx)
        n_train = SPLIT_PERCENT[0] * len(idx) // 100
        n_val = SPLIT_PERCENT[1] * len(idx) // 100
        masks[0][idx[:n_train]] = True
        masks[1][idx[n_train : n_train + n_val]] = True
        masks[2][idx[n_train + n_val :]] = True
    return SplitMasks(*masks)
