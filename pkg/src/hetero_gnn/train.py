"""Gradients, Adam, the training loop and the multi-run experiment harness."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import kernels
from .datasets import DatasetDescriptor, load_graph
from .errors import ConfigError, NumericsError, ParamError, TraceError
from .graph_core import Graph, SplitMasks, normalize_sym, spmm, stratified_split
from .model import (
    GcnSlParams,
    ForwardTrace,
    ModelInputs,
    accuracy,
    cross_entropy,
    forward,
    init_params,
)
from .spectral import compute_features
from .structure_learn import SimilarityHead, build_reconnected, preprocess_features

log = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
# augmented features below this density are kept in CSR form
SPARSE_DENSITY = 0.1


@dataclass(frozen=True)
class HyperParams:
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    p: int = 16  # output width of the similarity projection Q
    q: int = 32  # first-layer width (W0X, W0F)
    eps: float = 0.9
    m: int = 100
    c: int = 15
    K: int = 2
    seed: int = 42
    epochs: int = 500
    patience: int = 100
    combine: str = "cc"
    spectral: str = "esc_anch"
    use_A: bool = True
    use_Astar: bool = True
    decay_w: bool = False

    def __post_init__(self):
        positive = ("p", "q", "m", "c", "K", "epochs", "patience")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr < 0 or self.weight_decay < 0 or self.eps < 0:
            raise ConfigError("lr, weight_decay and eps must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.combine not in ("av", "cc"):
            raise ConfigError(f"combine must be 'av' or 'cc', got {self.combine!r}")
        if self.spectral not in ("esc_anch", "esc", "sc_dense"):
            raise ConfigError(f"unknown spectral method {self.spectral!r}")


# config-file keys that differ from the field names
CONFIG_ALIASES = {"wd": "weight_decay", "d": "dropout"}


def hyper_from_mapping(doc: dict) -> HyperParams:
    names = {f.name: f.type for f in fields(HyperParams)}
    kwargs = {}
    for key, value in doc.items():
        name = CONFIG_ALIASES.get(key, key)
        if name in names:
            kwargs[name] = value
    try:
        return HyperParams(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class GradientSet:
    Q: np.ndarray
    W0X: np.ndarray
    W0F: np.ndarray
    w: np.ndarray
    W1: np.ndarray

    def items(self):
        return ((f.name, getattr(self, f.name)) for f in fields(self))


def _row_normalize_backward(A_star: sp.csr_matrix, A_norm: sp.csr_matrix, g: np.ndarray) -> np.ndarray:
    # A_norm_ij = a_ij / s_i  =>  dL/da_ij = (g_ij - sum_k g_ik A_norm_ik) / s_i
    n = A_star.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A_star.indptr))
    sums = np.asarray(A_star.sum(axis=1)).ravel()
    dot = np.bincount(rows, weights=g * A_norm.data, minlength=n)
    return (g - dot[rows]) / sums[rows]


def backward_gradients(trace: ForwardTrace, inputs: ModelInputs, params: GcnSlParams) -> GradientSet:
    """Reverse pass over one forward trace.

    The thresholded support of the re-connected adjacency is treated as
    constant; gradients reach ``Q`` through the retained cosine values and
    the row normalization only.
    """
    if trace.loss_mask is None:
        raise TraceError("trace has no loss mask; run forward with loss_mask")
    if params.use_Astar and trace.recon is None:
        raise TraceError("trace is missing the re-connected adjacency")
    mask = trace.loss_mask
    labels = inputs.labels
    idx = np.flatnonzero(mask)

    dlogits = np.zeros_like(trace.Z)
    dlogits[idx] = trace.Z[idx]
    dlogits[idx, labels[idx]] -= 1.0
    dlogits /= len(idx)

    dW1 = trace.H_final.T @ dlogits
    dH_w = (dlogits @ params.W1.T) * (trace.H_w > 0)
    dw = (dH_w * trace.H_cb_drop).sum(axis=0)
    dH_cb = dH_w * params.w
    m1, m2 = trace.drop_masks
    if m2 is not None:
        dH_cb = dH_cb * m2

    width = params.hidden_width
    blocks = [dH_cb[:, i * width : (i + 1) * width] for i in range(params.n_blocks)]
    dH = blocks[0].copy()
    pos = 1
    if params.use_A:
        d_prev, g = blocks[pos], blocks[pos + 1]
        pos += 2
        for k in range(params.K, 0, -1):
            g = spmm(inputs.adj, g)
            if k - 1 == params.K - 1:
                g = g + d_prev
        dH += g

    dQ = np.zeros_like(params.Q)
    if params.use_Astar:
        G = blocks[pos]
        recon = trace.recon
        A_norm = recon.A_star_norm.values
        dH += spmm(recon.A_star_norm.transpose(), G)
        # dL/dA_norm_ij = G_i . H_j on the fixed support
        g_norm = kernels.sddmm(A_norm.indptr, A_norm.indices, np.ascontiguousarray(G), trace.H)
        g_vals = _row_normalize_backward(recon.A_star, A_norm, g_norm)
        rows = np.repeat(np.arange(A_norm.shape[0]), np.diff(A_norm.indptr))
        g_vals[rows == A_norm.indices] = 0.0  # diagonal is the constant 1
        M = sp.csr_matrix((g_vals, A_norm.indices, A_norm.indptr), shape=A_norm.shape)
        U = recon.unit
        dU = spmm(M, U) + spmm(M.T.tocsr(), U)
        radial = np.einsum("ij,ij->i", U, dU)
        dY = (dU - U * radial[:, None]) / recon.row_norms[:, None]
        dQ = np.asarray(inputs.x_aug.T @ dY)

    if m1 is not None:
        dH = dH * m1
    dpre = dH * (trace.pre > 0)
    q = params.W0X.shape[1]
    if params.combine == "av":
        dxw = dfw = 0.5 * dpre
    else:
        dxw, dfw = dpre[:, :q], dpre[:, q:]
    return GradientSet(
        Q=dQ,
        W0X=np.asarray(inputs.x_aug.T @ dxw),
        W0F=inputs.F.T @ dfw,
        w=dw,
        W1=dW1,
    )


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: GcnSlParams,
    grads: GradientSet,
    state: AdamState,
    lr: float,
    weight_decay: float,
    decay_w: bool = False,
) -> tuple[GcnSlParams, AdamState]:
    """Bias-corrected Adam with coupled L2 weight decay."""
    b1, b2 = ADAM_BETAS
    t = state.t + 1
    new_m, new_v, updated = {}, {}, {}
    for name, g in grads.items():
        theta = getattr(params, name)
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for {name}")
        if weight_decay and (name != "w" or decay_w):
            g = g + weight_decay * theta
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        updated[name] = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        new_m[name], new_v[name] = m, v
    return params.with_tensors(**updated), AdamState(new_m, new_v, t)


@dataclass
class TrainReport:
    seed: int
    train_loss: list
    val_loss: list
    val_acc: list
    train_acc: list
    best_epoch: int
    best_val_loss: float
    test_acc: float
    chosen_dim: int
    astar_h_initial: float | None = None
    astar_h_final: float | None = None
    timings: dict = field(default_factory=dict, compare=False)
    params: GcnSlParams | None = field(default=None, compare=False, repr=False)
    F: np.ndarray | None = field(default=None, compare=False, repr=False)
    split: SplitMasks | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        """Reproducible fields only; wall-clock timings are left out."""
        skip = ("params", "F", "split", "timings")
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


def _astar_h(recon, labels):
    try:
        return recon.homophily(labels)
    except ArithmeticError:
        return None
    except ValueError:
        return None


def spectral_input(X: np.ndarray) -> np.ndarray:
    """Shift columns with negative entries so their minimum is 0.

    The affinities assume nonnegative features (bag-of-words); on such
    data this returns ``X`` unchanged.
    """
    low = np.minimum(X.min(axis=0), 0.0)
    return X - low if np.any(low < 0) else X


def prepare_inputs(graph: Graph, hyper: HyperParams, cache_dir=None):
    """Spectral features from the raw features, then the 0.5 column injection."""
    t0 = time.perf_counter()
    F = compute_features(
        spectral_input(graph.features), hyper.spectral, hyper.c, m=hyper.m, seed=hyper.seed, cache_dir=cache_dir
    ).F
    t_spec = time.perf_counter() - t0
    X_aug, dim = preprocess_features(graph.features, hyper.seed)
    if np.count_nonzero(X_aug) < SPARSE_DENSITY * X_aug.size:
        X_aug = sp.csr_matrix(X_aug)
    inputs = ModelInputs(X_aug, F, normalize_sym(graph), np.asarray(graph.labels), graph.class_count)
    return inputs, dim, t_spec


def evaluate(inputs: ModelInputs, params: GcnSlParams, eps: float):
    recon = build_reconnected(inputs.x_aug, SimilarityHead(params.Q, eps)) if params.use_Astar else None
    return forward(inputs, params, recon, mode="eval"), recon


def fit(graph: Graph, hyper: HyperParams, split: SplitMasks | None = None, cache_dir=None) -> TrainReport:
    """Train one model; the reported test accuracy is that of the
    minimum-validation-loss snapshot."""
    seed = hyper.seed
    split = split if split is not None else stratified_split(graph, seed)
    inputs, dim, t_spec = prepare_inputs(graph, hyper, cache_dir)
    init_ss, drop_ss = np.random.SeedSequence(seed).spawn(2)
    params = init_params(
        graph.n_features, hyper.c, graph.class_count, hyper.q, hyper.p, hyper.K,
        hyper.combine, np.random.default_rng(init_ss), hyper.use_A, hyper.use_Astar,
    )
    drop_rng = np.random.default_rng(drop_ss)
    head = SimilarityHead(params.Q, hyper.eps)
    recon = build_reconnected(inputs.x_aug, head) if hyper.use_Astar else None
    h_init = _astar_h(recon, graph.labels) if recon is not None else None

    state = AdamState()
    hist = {"train_loss": [], "val_loss": [], "val_acc": [], "train_acc": []}
    best = (np.inf, -1, params.copy())
    bad = 0
    t0 = time.perf_counter()
    for epoch in range(hyper.epochs):
        trace = forward(inputs, params, recon, "train", hyper.dropout, drop_rng, split.train_mask)
        grads = backward_gradients(trace, inputs, params)
        params, state = adam_step(params, grads, state, hyper.lr, hyper.weight_decay, hyper.decay_w)
        ev, recon = evaluate(inputs, params, hyper.eps)
        val_loss = cross_entropy(ev.logits, inputs.labels, split.val_mask)
        hist["train_loss"].append(trace.loss)
        hist["val_loss"].append(val_loss)
        hist["val_acc"].append(accuracy(ev.Z, inputs.labels, split.val_mask))
        hist["train_acc"].append(accuracy(ev.Z, inputs.labels, split.train_mask))
        if not np.isfinite(val_loss):
            raise NumericsError(f"seed {seed}: validation loss became {val_loss} at epoch {epoch}")
        if val_loss < best[0]:
            best = (val_loss, epoch, params.copy())
            bad = 0
        else:
            bad += 1
            if bad >= hyper.patience:
                break
    t_train = time.perf_counter() - t0

    best_loss, best_epoch, best_params = best
    ev, best_recon = evaluate(inputs, best_params, hyper.eps)
    test_acc = accuracy(ev.Z, inputs.labels, split.test_mask)
    log.info("seed %d: best epoch %d, val loss %.4f, test acc %.4f", seed, best_epoch, best_loss, test_acc)
    return TrainReport(
        seed=seed,
        best_epoch=best_epoch,
        best_val_loss=float(best_loss),
        test_acc=test_acc,
        chosen_dim=dim,
        astar_h_initial=h_init,
        astar_h_final=_astar_h(best_recon, graph.labels) if best_recon is not None else None,
        timings={"spectral_seconds": t_spec, "train_seconds": t_train, "epochs_run": len(hist["val_loss"])},
        params=best_params,
        F=inputs.F,
        split=split,
        **hist,
    )


@dataclass
class ExperimentSummary:
    acc_mean: float
    acc_std: float
    reports: list

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.reports]

    def to_dict(self) -> dict:
        return {
            "acc_mean": self.acc_mean,
            "acc_std": self.acc_std,
            "runs": [
                {k: v for k, v in r.to_dict().items() if k not in ("train_loss", "val_loss", "val_acc", "train_acc")}
                for r in self.reports
            ],
        }


def run_experiment(source: Graph | DatasetDescriptor, hyper: HyperParams, runs: int = 10, cache_dir=None) -> ExperimentSummary:
    """Train ``runs`` models with seeds ``hyper.seed .. hyper.seed + runs - 1``.

    Each run gets its own split, anchors, column injection and init.
    """
    if runs < 1:
        raise ParamError("runs must be >= 1")
    graph = source if isinstance(source, Graph) else load_graph(source)
    reports = []
    for k in range(runs):
        seed = hyper.seed + k
        run_hyper = HyperParams(**{**asdict(hyper), "seed": seed})
        try:
            reports.append(fit(graph, run_hyper, cache_dir=cache_dir))
        except Exception as exc:
            raise RuntimeError(f"run with seed {seed} failed: {exc}") from exc
    accs = np.array([r.test_acc for r in reports])
    std = float(accs.std(ddof=1)) if runs > 1 else 0.0
    return ExperimentSummary(float(accs.mean()), std, reports)


def load_config(path: str | Path) -> dict:
    """Read a flat JSON config document."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict) or any(isinstance(v, (dict, list)) for v in doc.values()):
        raise ConfigError(f"{path}: config must be a flat key/value object")
    return doc
