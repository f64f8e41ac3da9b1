"""Learned cosine-similarity graph (the re-connected adjacency).

The support of the re-connected adjacency is every pair whose projected
cosine similarity reaches the threshold ``eps``; the diagonal is always
kept.  Values are the similarities themselves, then row-normalized.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import NormError, ParamError, ShapeError
from .graph_core import NormalizedAdjacency, _canonical_csr, edge_homophily, row_normalize

AUGMENT_VALUE = 0.5


@dataclass(frozen=True, eq=False)
class SimilarityHead:
    Q: np.ndarray
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ParamError(f"eps must be non-negative, got {self.eps}")
        if not np.all(np.isfinite(self.Q)):
            raise ParamError("Q contains non-finite values")

    @property
    def p(self) -> int:
        return self.Q.shape[1]


@dataclass(frozen=True, eq=False)
class ReconnectedAdjacency:
    A_star: sp.csr_matrix
    A_star_norm: NormalizedAdjacency
    # unit-norm projected rows; kept for the backward pass
    unit: np.ndarray
    row_norms: np.ndarray

    @property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        coo = self.A_star.tocoo()
        return coo.row, coo.col

    def homophily(self, labels) -> float:
        return edge_homophily(self.A_star, np.asarray(labels))


def init_head(d: int, p: int, eps: float, rng: np.random.Generator) -> SimilarityHead:
    bound = 1.0 / np.sqrt(d)
    return SimilarityHead(rng.uniform(-bound, bound, size=(d, p)), eps)


def preprocess_features(X, seed: int) -> tuple[np.ndarray, int]:
    """Add 0.5 to one randomly chosen feature column; returns (X_aug, column)."""
    X = np.asarray(X, dtype=np.float64)
    j = int(np.random.default_rng(seed).integers(0, X.shape[1]))
    X_aug = X.copy()
    X_aug[:, j] += AUGMENT_VALUE
    return X_aug, j


def _features(X):
    # sparse bag-of-words inputs stay sparse
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    return np.asarray(X, dtype=np.float64)


def project_unit(X_aug: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if X_aug.shape[1] != Q.shape[0]:
        raise ShapeError(f"features {X_aug.shape} incompatible with Q {Q.shape}")
    Y = np.asarray(X_aug @ Q)
    norms = np.linalg.norm(Y, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise NormError(f"{len(zero)} projected row(s) have zero norm (first: {zero[0]})")
    return np.ascontiguousarray(Y / norms[:, None]), norms


def learned_cosine_similarity(X_aug, head: SimilarityHead) -> np.ndarray:
    """Dense ``n x n`` matrix of cos(x_i Q, x_j Q); intended for small graphs."""
    unit, _ = project_unit(_features(X_aug), head.Q)
    S = unit @ unit.T
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    return S


def support_from_unit(unit: np.ndarray, eps: float) -> sp.csr_matrix:
    """Symmetric CSR of all similarities >= eps, diagonal fixed at 1."""
    n = unit.shape[0]
    r, c, v = kernels.threshold_upper(unit, float(eps))
    diag = np.arange(n, dtype=np.int32)
    rows = np.concatenate([r, c, diag])
    cols = np.concatenate([c, r, diag])
    vals = np.concatenate([v, v, np.ones(n)])
    return _canonical_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)), np.float64)


def build_reconnected(X_aug, head: SimilarityHead) -> ReconnectedAdjacency:
    """Threshold the learned similarities at ``head.eps`` and row-normalize."""
    unit, norms = project_unit(_features(X_aug), head.Q)
    A = support_from_unit(unit, head.eps)
    return ReconnectedAdjacency(A, row_normalize(A), unit, norms)


def reconnect_on_support(X_aug, Q: np.ndarray, support: sp.csr_matrix) -> ReconnectedAdjacency:
    """Re-evaluate similarities for ``Q`` on an existing support pattern.

    Used to hold the thresholded pattern fixed while ``Q`` varies (gradient
    checks, straight-through updates).
    """
    unit, norms = project_unit(_features(X_aug), Q)
    A = support.copy()
    A.data = kernels.sddmm(A.indptr, A.indices, unit, unit)
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    A.data[rows == A.indices] = 1.0
    return ReconnectedAdjacency(A, row_normalize(A), unit, norms)


def write_support_csv(path: str | Path, adj: ReconnectedAdjacency) -> None:
    """Dump the upper-triangle support as ``i,j,similarity`` rows."""
    coo = sp.triu(adj.A_star, k=1).tocoo()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "similarity"])
        for i, j, s in zip(coo.row, coo.col, coo.data):
            w.writerow([int(i), int(j), repr(float(s))])
