"""Spectral-clustering feature matrices.

Three routes to the top-``c`` eigenvectors of a normalized affinity
``G = D^-1/2 S D^-1/2``:

* :func:`sc_dense` builds the full Gaussian affinity and eigendecomposes it.
* :func:`esc` uses ``S = X X^T`` so that ``G = P P^T`` with ``P = D^-1/2 X``.
* :func:`esc_anch` replaces ``X`` by the node-to-anchor cosine matrix ``R``.

The factored routes never form an ``n x n`` array; the left singular
vectors of ``P`` come from the small Gram matrix ``P^T P``.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, ParamError, TooLarge

CACHE_ENV = "HETERO_GNN_CACHE"
DEGREE_FLOOR = 1e-12
RANK_TOL = 1e-10
DENSE_LIMIT = 20000

Method = Literal["sc_dense", "esc", "esc_anch"]


@dataclass(frozen=True, eq=False)
class SpectralFeatures:
    F: np.ndarray
    method: Method
    # singular values (factored routes) or eigenvalues (dense), descending
    spectrum: np.ndarray

    @property
    def c(self) -> int:
        return self.F.shape[1]


@dataclass(frozen=True, eq=False)
class AnchorSet:
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ParamError("anchor indices must be distinct")
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return len(self.indices)


def sample_anchors(n: int, m: int, seed: int) -> AnchorSet:
    """Uniformly sample ``m`` distinct anchor nodes out of ``n``."""
    if not 0 < m <= n:
        raise ParamError(f"anchor count must be in 1..{n}, got {m}")
    rng = np.random.default_rng(seed)
    return AnchorSet(np.sort(rng.choice(n, size=m, replace=False)))


def fix_signs(F: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    F = np.array(F, dtype=np.float64, copy=True)
    if F.size == 0:
        return F
    pivot = F[np.argmax(np.abs(F), axis=0), np.arange(F.shape[1])]
    F *= np.where(pivot < 0, -1.0, 1.0)
    return F


def gaussian_affinity(X: np.ndarray, sigma: float) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    np.fill_diagonal(dist2, 0.0)
    return np.exp(-dist2 / (2.0 * sigma**2))


def median_pairwise_distance(X: np.ndarray, max_rows: int = 2000, seed: int = 0) -> float:
    """Median Euclidean distance between distinct rows (subsampled for large n)."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) > max_rows:
        X = X[np.random.default_rng(seed).choice(len(X), max_rows, replace=False)]
    sq = np.einsum("ij,ij->i", X, X)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    iu = np.triu_indices(len(X), k=1)
    return float(np.sqrt(np.median(d2[iu])))


def sc_dense(X, c: int, sigma: float, max_nodes: int = DENSE_LIMIT) -> SpectralFeatures:
    """Reference spectral embedding from the full Gaussian affinity."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= c <= n:
        raise ParamError(f"c must be in 1..{n}, got {c}")
    if sigma <= 0:
        raise ParamError("sigma must be positive")
    if n > max_nodes:
        raise TooLarge(f"dense spectral clustering limited to {max_nodes} nodes, got {n}")
    S = gaussian_affinity(X, sigma)
    deg = S.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    S *= inv[:, None]
    S *= inv[None, :]
    vals, vecs = scipy.linalg.eigh(S, subset_by_index=[n - c, n - 1], overwrite_a=True)
    order = np.argsort(vals)[::-1]
    return SpectralFeatures(fix_signs(vecs[:, order]), "sc_dense", vals[order])


def _left_singular(P: np.ndarray, c: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``c`` left singular vectors of a tall ``P`` via ``P^T P``."""
    gram = P.T @ P
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    sing = np.sqrt(np.clip(evals, 0.0, None))
    rank = int(np.sum(sing > RANK_TOL * sing[0])) if len(sing) and sing[0] > 0 else 0
    if rank < c:
        raise ParamError(f"factor matrix has numerical rank {rank} < c={c}")
    U = (P @ evecs[:, :c]) / sing[:c]
    return U, sing[:c]


def _degrees(R: np.ndarray) -> np.ndarray:
    # row sums of R R^T without forming it
    deg = R @ R.sum(axis=0)
    bad = np.flatnonzero(deg < DEGREE_FLOOR)
    if len(bad):
        raise DegeneracyError(
            f"{len(bad)} node(s) have affinity degree below {DEGREE_FLOOR} (first: {bad[0]}); "
            "all-zero feature rows must be removed or augmented first"
        )
    return deg


def esc(X, c: int) -> SpectralFeatures:
    """Spectral features for the inner-product affinity ``X X^T``."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 1 <= c <= min(n, d):
        raise ParamError(f"c must be in 1..{min(n, d)}, got {c}")
    if X.size and X.min() < 0:
        raise ParamError("esc requires non-negative features")
    P = X / np.sqrt(_degrees(X))[:, None]
    U, sing = _left_singular(P, c)
    return SpectralFeatures(fix_signs(U), "esc", sing)


def anchor_cosine(X: np.ndarray, anchors: AnchorSet) -> np.ndarray:
    """Cosine similarity of every row of ``X`` to each anchor row (zero rows give 0)."""
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = X / safe[:, None]
    return unit @ unit[anchors.indices].T


def esc_anch(X, anchors: AnchorSet | int, c: int, seed: int = 0) -> SpectralFeatures:
    """Anchor-based spectral features.

    ``anchors`` may be an :class:`AnchorSet` or an anchor count, in which
    case anchors are drawn with :func:`sample_anchors` using ``seed``.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if isinstance(anchors, (int, np.integer)):
        anchors = sample_anchors(n, int(anchors), seed)
    if anchors.m and (anchors.indices.min() < 0 or anchors.indices.max() >= n):
        raise ParamError("anchor index out of range")
    if not 1 <= c <= anchors.m:
        raise ParamError(f"c must be in 1..m={anchors.m}, got {c}")
    R = anchor_cosine(X, anchors)
    P = R / np.sqrt(_degrees(R))[:, None]
    U, sing = _left_singular(P, c)
    return SpectralFeatures(fix_signs(U), "esc_anch", sing)


def compute_features(
    X,
    method: Method,
    c: int,
    m: int | None = None,
    seed: int = 0,
    sigma: float | None = None,
    cache_dir: str | Path | None = None,
) -> SpectralFeatures:
    """Dispatch to one of the three methods, optionally through an on-disk cache.

    The cache directory defaults to ``$HETERO_GNN_CACHE``; entries are keyed
    by (feature hash, method, m, c, seed).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    path = None
    if cache_dir:
        digest = hashlib.sha256(X.tobytes() + str(X.shape).encode()).hexdigest()[:16]
        tag = f"_sigma{sigma!r}" if method == "sc_dense" and sigma is not None else ""
        path = Path(cache_dir) / f"{digest}_{method}_m{m}_c{c}_s{seed}{tag}.npz"
        if path.exists():
            with np.load(path) as z:
                return SpectralFeatures(z["F"], method, z["spectrum"])
    if method == "sc_dense":
        out = sc_dense(X, c, sigma if sigma is not None else median_pairwise_distance(X, seed=seed))
    elif method == "esc":
        out = esc(X, c)
    elif method == "esc_anch":
        if m is None:
            raise ParamError("esc_anch needs an anchor count m")
        out = esc_anch(X, m, c, seed)
    else:
        raise ParamError(f"unknown spectral method {method!r}")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, F=out.F, spectrum=out.spectrum)
    return out


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spaces of A and B."""
    return scipy.linalg.subspace_angles(A, B)
