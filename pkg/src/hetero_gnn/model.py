"""Forward computation of the structure-learning GCN and the plain two-layer GCN baseline.

Forward pass, for enhanced features ``H`` built from ``X`` and spectral
features ``F``::

    H        = ReLU((X W0X + F W0F) / 2)        combine="av"
             = ReLU([X W0X, F W0F])             combine="cc"
    H_A(k)   = A_hat H_A(k-1),  H_A(0) = H,  k = 1..K
    H_A*     = A*_hat H
    H_cb     = [H, H_A(K-1), H_A(K), H_A*]
    H_final  = ReLU(w * H_cb)
    Z        = softmax(H_final W1)

No bias terms are used anywhere.  Dropout (training only) is applied to
``H`` and to ``H_cb``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import MaskError, ParamError, ShapeError
from .graph_core import NormalizedAdjacency, spmm
from .structure_learn import ReconnectedAdjacency

CHECKPOINT_VERSION = 1
TENSOR_NAMES = ("Q", "W0X", "W0F", "w", "W1")

Combine = Literal["av", "cc"]
Mode = Literal["train", "eval"]


@dataclass(frozen=True, eq=False)
class GcnSlParams:
    Q: np.ndarray
    W0X: np.ndarray
    W0F: np.ndarray
    w: np.ndarray
    W1: np.ndarray
    combine: Combine = "cc"
    K: int = 2
    use_A: bool = True
    use_Astar: bool = True

    def __post_init__(self):
        if self.combine not in ("av", "cc"):
            raise ParamError(f"combine must be 'av' or 'cc', got {self.combine!r}")
        if self.K < 1:
            raise ParamError("K must be at least 1")
        if self.W0X.shape[1] != self.W0F.shape[1]:
            raise ShapeError(f"W0X {self.W0X.shape} and W0F {self.W0F.shape} widths differ")
        if self.w.shape != (self.combined_width,):
            raise ShapeError(f"w must have shape ({self.combined_width},), got {self.w.shape}")
        if self.W1.shape[0] != self.combined_width:
            raise ShapeError(f"W1 must have {self.combined_width} rows, got {self.W1.shape}")

    @property
    def hidden_width(self) -> int:
        q = self.W0X.shape[1]
        return q if self.combine == "av" else 2 * q

    @property
    def n_blocks(self) -> int:
        return 1 + 2 * self.use_A + self.use_Astar

    @property
    def combined_width(self) -> int:
        return self.n_blocks * self.hidden_width

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    def with_tensors(self, **arrays) -> "GcnSlParams":
        return replace(self, **arrays)

    def copy(self) -> "GcnSlParams":
        return replace(self, **{k: v.copy() for k, v in self.tensors().items()})


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(
    d: int,
    c: int,
    n_classes: int,
    q: int,
    p: int,
    K: int,
    combine: Combine,
    rng: np.random.Generator,
    use_A: bool = True,
    use_Astar: bool = True,
) -> GcnSlParams:
    """Fan-in scaled uniform init; the reweighting vector starts at ones.

    ``q`` is the first-layer width, ``p`` the projection width of ``Q``.
    """
    Q = _uniform(rng, d, (d, p))
    W0X = _uniform(rng, d, (d, q))
    W0F = _uniform(rng, c, (c, q))
    hidden = q if combine == "av" else 2 * q
    width = (1 + 2 * use_A + use_Astar) * hidden
    W1 = _uniform(rng, width, (width, n_classes))
    return GcnSlParams(Q, W0X, W0F, np.ones(width), W1, combine, K, use_A, use_Astar)


@dataclass(frozen=True, eq=False)
class ModelInputs:
    """Per-run immutable inputs: augmented features, spectral features, A_hat."""

    x_aug: np.ndarray
    F: np.ndarray
    adj: NormalizedAdjacency
    labels: np.ndarray
    class_count: int


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    mode: str
    pre: np.ndarray
    H: np.ndarray
    H_A_list: list
    H_Astar: np.ndarray | None
    H_cb: np.ndarray
    H_cb_drop: np.ndarray
    H_w: np.ndarray
    H_final: np.ndarray
    logits: np.ndarray
    Z: np.ndarray
    loss: float | None
    loss_mask: np.ndarray | None
    recon: ReconnectedAdjacency | None
    drop_masks: tuple = field(default=(None, None))


def _dropout_mask(rng, shape, rate):
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def enhanced_features(X_aug, F, params: GcnSlParams) -> tuple[np.ndarray, np.ndarray]:
    """First layer; returns (pre-activation, H)."""
    if X_aug.shape[1] != params.W0X.shape[0] or F.shape[1] != params.W0F.shape[0]:
        raise ShapeError(
            f"features {X_aug.shape}/{F.shape} incompatible with W0X {params.W0X.shape}/W0F {params.W0F.shape}"
        )
    xw = np.asarray(X_aug @ params.W0X)
    fw = F @ params.W0F
    pre = 0.5 * (xw + fw) if params.combine == "av" else np.concatenate([xw, fw], axis=1)
    return pre, np.maximum(pre, 0.0)


def propagate(H, A_hat: NormalizedAdjacency | None, A_star_hat: NormalizedAdjacency | None, K: int):
    """Return ([H_A(0), ..., H_A(K)], A*_hat H).  Either adjacency may be None."""
    if K < 1:
        raise ParamError("K must be at least 1")
    H_A = [H]
    if A_hat is not None:
        for _ in range(K):
            H_A.append(spmm(A_hat, H_A[-1]))
    H_star = spmm(A_star_hat, H) if A_star_hat is not None else None
    return H_A, H_star


def combine_blocks(H, H_A_list, H_Astar, K: int, use_A=True, use_Astar=True) -> np.ndarray:
    blocks = [H]
    if use_A:
        blocks += [H_A_list[K - 1], H_A_list[K]]
    if use_Astar:
        blocks.append(H_Astar)
    return np.concatenate(blocks, axis=1)


def combine_and_reweight(H, H_A_list, H_Astar, params: GcnSlParams) -> np.ndarray:
    """ReLU(w * [H, H_A(K-1), H_A(K), H_A*]) (no dropout)."""
    H_cb = combine_blocks(H, H_A_list, H_Astar, params.K, params.use_A, params.use_Astar)
    if params.w.shape != (H_cb.shape[1],):
        raise ShapeError(f"w has shape {params.w.shape}, combined width is {H_cb.shape[1]}")
    return np.maximum(params.w * H_cb, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MaskError("loss mask selects no nodes")
    logp = log_softmax(logits[mask])
    return float(-logp[np.arange(mask.sum()), np.asarray(labels)[mask]].mean())


def classify_and_loss(H_final, W1, labels, mask) -> tuple[np.ndarray, float]:
    logits = H_final @ W1
    return softmax(logits), cross_entropy(logits, labels, mask)


def forward(
    inputs: ModelInputs,
    params: GcnSlParams,
    recon: ReconnectedAdjacency | None,
    mode: Mode = "eval",
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    loss_mask=None,
    drop_masks=None,
) -> ForwardTrace:
    """Full forward pass.

    In train mode with ``dropout > 0`` masks are drawn from ``rng`` unless
    ``drop_masks`` supplies them explicitly.
    """
    if params.use_Astar and recon is None:
        raise ParamError("a re-connected adjacency is required when use_Astar is set")
    pre, H = enhanced_features(inputs.x_aug, inputs.F, params)
    m1 = m2 = None
    training = mode == "train" and (dropout > 0 or drop_masks is not None)
    if training:
        if drop_masks is not None:
            m1, m2 = drop_masks
        else:
            if rng is None:
                raise ParamError("train-mode dropout needs an rng")
            m1 = _dropout_mask(rng, H.shape, dropout)
            m2 = _dropout_mask(rng, (H.shape[0], params.combined_width), dropout)
        H = H * m1
    H_A_list, H_star = propagate(
        H,
        inputs.adj if params.use_A else None,
        recon.A_star_norm if params.use_Astar else None,
        params.K,
    )
    H_cb = combine_blocks(H, H_A_list, H_star, params.K, params.use_A, params.use_Astar)
    H_cb_drop = H_cb * m2 if m2 is not None else H_cb
    H_w = params.w * H_cb_drop
    H_final = np.maximum(H_w, 0.0)
    logits = H_final @ params.W1
    Z = softmax(logits)
    loss = None
    if loss_mask is not None:
        loss = cross_entropy(logits, inputs.labels, loss_mask)
    return ForwardTrace(
        mode, pre, H, H_A_list, H_star, H_cb, H_cb_drop, H_w, H_final, logits, Z, loss,
        None if loss_mask is None else np.asarray(loss_mask, dtype=bool), recon, (m1, m2),
    )


def accuracy(Z: np.ndarray, labels, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MaskError("accuracy mask selects no nodes")
    return float(np.mean(Z[mask].argmax(axis=1) == np.asarray(labels)[mask]))


def gcn_baseline_forward(adj: NormalizedAdjacency, X, W0, W1) -> np.ndarray:
    """Two-layer GCN: softmax(A_hat ReLU(A_hat X W0) W1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != W0.shape[0] or W0.shape[1] != W1.shape[0] or adj.shape[1] != X.shape[0]:
        raise ShapeError(f"incompatible shapes A{adj.shape} X{X.shape} W0{W0.shape} W1{W1.shape}")
    hidden = np.maximum(spmm(adj, X @ W0), 0.0)
    return softmax(spmm(adj, hidden @ W1))


# Checkpoints are .npz archives holding one array per trainable tensor under
# "tensor/<name>" plus extra arrays under "extra/<name>", and a JSON
# document "meta" with the format version and structural settings.


def save_checkpoint(path: str | Path, params: GcnSlParams, extra_arrays=None, meta=None) -> None:
    doc = {
        "format": "hetero_gnn.checkpoint",
        "version": CHECKPOINT_VERSION,
        "combine": params.combine,
        "K": params.K,
        "use_A": params.use_A,
        "use_Astar": params.use_Astar,
        "shapes": {k: list(v.shape) for k, v in params.tensors().items()},
        "meta": meta or {},
    }
    arrays = {f"tensor/{k}": v for k, v in params.tensors().items()}
    arrays.update({f"extra/{k}": np.asarray(v) for k, v in (extra_arrays or {}).items()})
    arrays["meta"] = np.frombuffer(json.dumps(doc, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> tuple[GcnSlParams, dict, dict]:
    """Return (params, extra arrays, user metadata)."""
    with np.load(path) as z:
        doc = json.loads(z["meta"].tobytes().decode())
        if doc.get("format") != "hetero_gnn.checkpoint" or doc.get("version") != CHECKPOINT_VERSION:
            raise ParamError(f"{path}: unsupported checkpoint format {doc.get('format')} v{doc.get('version')}")
        tensors = {k: z[f"tensor/{k}"].copy() for k in TENSOR_NAMES}
        extras = {k[len("extra/"):]: z[k].copy() for k in z.files if k.startswith("extra/")}
    settings = {f.name: doc[f.name] for f in fields(GcnSlParams) if f.name in doc}
    return GcnSlParams(**tensors, **settings), extras, doc["meta"]
