"""Command-line entry point.

Every numeric setting lives in a flat JSON config; flags only pick the
dataset, data directory, output directory, run count and base seed.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import datasets, kernels, spectral
from .errors import ConfigError
from .graph_core import Graph, homophily_ratio, normalize_sym, stratified_split
from .model import ModelInputs, accuracy, load_checkpoint, save_checkpoint
from .structure_learn import SimilarityHead, build_reconnected, preprocess_features, write_support_csv
from .train import HyperParams, evaluate, hyper_from_mapping, load_config, run_experiment

log = logging.getLogger("hetero_gnn")

SYNTH_KEYS = {"synth_n": 200, "synth_classes": 2, "synth_d": 16, "synth_h": 0.2, "synth_seed": 0, "synth_avg_degree": 4.0, "synth_noise": 0.1}


def _num(v: float) -> str:
    return repr(float(v)) if v is not None else ""


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _settings(args) -> tuple[dict, HyperParams]:
    if args.config is None:
        raise ConfigError("--config is required")
    doc = load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.dataset is not None:
        doc["dataset"] = args.dataset
    if args.runs is not None:
        doc["runs"] = args.runs
    doc.setdefault("runs", 10)
    if not isinstance(doc["runs"], int) or doc["runs"] < 1:
        raise ConfigError("runs must be a positive integer")
    if "dataset" not in doc:
        raise ConfigError("config names no dataset (set 'dataset' or pass --dataset)")
    return doc, hyper_from_mapping(doc)


def _graph(doc: dict, data_dir) -> Graph:
    name = str(doc["dataset"])
    if name == "synthetic":
        s = {k: doc.get(k, v) for k, v in SYNTH_KEYS.items()}
        return datasets.synth_graph(
            int(s["synth_n"]), int(s["synth_classes"]), int(s["synth_d"]), float(s["synth_h"]),
            int(s["synth_seed"]), avg_degree=float(s["synth_avg_degree"]), noise=float(s["synth_noise"]),
        )
    return datasets.load(name, data_dir)


def _metadata(out: Path, extra: dict) -> None:
    doc = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        **extra,
    }
    _write_json(out / "metadata.json", doc)


def cmd_train(args) -> None:
    doc, hyper = _settings(args)
    graph = _graph(doc, args.data_dir)
    summary = run_experiment(graph, hyper, runs=doc["runs"])
    out = args.out
    rows = []
    for r in summary.reports:
        rows.append([r.seed, r.best_epoch, _num(r.best_val_loss), _num(r.test_acc), _num(r.astar_h_initial), _num(r.astar_h_final)])
        _write_csv(
            out / f"epochs_seed{r.seed}.csv",
            ["epoch", "train_loss", "val_loss", "val_acc", "train_acc"],
            [[e, _num(a), _num(b), _num(c), _num(d)] for e, (a, b, c, d) in enumerate(zip(r.train_loss, r.val_loss, r.val_acc, r.train_acc))],
        )
        save_checkpoint(
            out / f"checkpoint_seed{r.seed}.npz",
            r.params,
            extra_arrays={"F": r.F},
            meta={"dataset": doc["dataset"], "seed": r.seed, "chosen_dim": r.chosen_dim, "hyper": asdict(replace(hyper, seed=r.seed))},
        )
    _write_csv(out / "runs.csv", ["seed", "best_epoch", "best_val_loss", "test_acc", "h_astar_initial", "h_astar"], rows)
    _write_json(
        out / "summary.json",
        {"dataset": doc["dataset"], "K": hyper.K, "eps": hyper.eps, "hyper": asdict(hyper), **summary.to_dict()},
    )
    _metadata(out, {"timings": {str(r.seed): r.timings for r in summary.reports}})
    print(f"{doc['dataset']}: acc_mean={summary.acc_mean:.4f} acc_std={summary.acc_std:.4f} over {len(summary.reports)} run(s)")


def _restore(checkpoint: Path, graph: Graph):
    params, extras, meta = load_checkpoint(checkpoint)
    hyper = HyperParams(**meta["hyper"])
    X_aug, dim = preprocess_features(graph.features, hyper.seed)
    if dim != meta["chosen_dim"]:
        raise ConfigError(f"checkpoint was trained with feature column {meta['chosen_dim']}, replay chose {dim}")
    inputs = ModelInputs(X_aug, extras["F"], normalize_sym(graph), np.asarray(graph.labels), graph.class_count)
    return params, hyper, inputs, meta


def cmd_eval(args) -> None:
    if args.checkpoint is None:
        raise ConfigError("eval needs --checkpoint")
    _, _, meta = load_checkpoint(args.checkpoint)
    doc = {"dataset": args.dataset or meta["dataset"]}
    if args.config is not None:
        doc.update({k: v for k, v in load_config(args.config).items() if k.startswith("synth_") or k == "dataset"})
        if args.dataset is not None:
            doc["dataset"] = args.dataset
    graph = _graph(doc, args.data_dir)
    params, hyper, inputs, meta = _restore(args.checkpoint, graph)
    split = stratified_split(graph, hyper.seed)
    ev, _ = evaluate(inputs, params, hyper.eps)
    result = {
        "dataset": doc["dataset"],
        "seed": hyper.seed,
        "test_acc": accuracy(ev.Z, inputs.labels, split.test_mask),
        "val_acc": accuracy(ev.Z, inputs.labels, split.val_mask),
        "train_acc": accuracy(ev.Z, inputs.labels, split.train_mask),
    }
    if args.out is not None:
        _write_json(args.out / "eval.json", result)
    print(f"{result['dataset']} seed {result['seed']}: test_acc={result['test_acc']:.4f}")


def cmd_homophily(args) -> None:
    doc = load_config(args.config) if args.config else {}
    if args.dataset is not None:
        doc["dataset"] = args.dataset
    if "dataset" not in doc:
        raise ConfigError("homophily needs a dataset")
    graph = _graph(doc, args.data_dir)
    rows = [[doc["dataset"], "original", _num(homophily_ratio(graph))]]
    if args.checkpoint is not None:
        params, hyper, inputs, _ = _restore(args.checkpoint, graph)
        recon = build_reconnected(inputs.x_aug, SimilarityHead(params.Q, hyper.eps))
        rows.append([doc["dataset"], "reconnected", _num(recon.homophily(graph.labels))])
        if args.out is not None:
            write_support_csv(args.out / "astar_support.csv", recon)
    for r in rows:
        print(f"{r[0]} {r[1]}: h={float(r[2]):.4f}")
    if args.out is not None:
        _write_csv(args.out / "homophily.csv", ["dataset", "graph", "h"], rows)


def cmd_spectral_bench(args) -> None:
    doc = load_config(args.config) if args.config else {}
    if args.dataset is not None:
        doc["dataset"] = args.dataset
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    m, c = int(doc.get("m", 100)), int(doc.get("c", 15))
    cases = []
    if doc.get("dataset") not in (None, "synthetic"):
        g = datasets.load(doc["dataset"], args.data_dir)
        cases.append((doc["dataset"], g.features))
    else:
        sizes = [int(s) for s in str(doc.get("bench_sizes", "500,1000,2000")).split(",")]
        d = int(doc.get("bench_d", 500))
        density = float(doc.get("bench_density", 0.05))
        for n in sizes:
            cases.append((f"synthetic_n{n}", datasets.synth_bag_of_words(n, d, density, seed)))
    methods = [s.strip() for s in str(doc.get("bench_methods", "sc_dense,esc,esc_anch")).split(",")]
    rows = []
    for name, X in cases:
        n, d = X.shape
        timings = {}
        for method in methods:
            t0 = time.perf_counter()
            try:
                spectral.compute_features(X, method, c, m=m, seed=seed, cache_dir="")
                timings[method] = time.perf_counter() - t0
            except (MemoryError, ValueError, ArithmeticError) as exc:
                log.warning("%s on %s failed: %s", method, name, exc)
                timings[method] = None
        for method in methods:
            t = timings[method]
            base = timings.get("sc_dense")
            speedup = base / t if (t and base) else None
            rows.append([name, n, d, m, c, method, _num(t), _num(speedup)])
            print(f"{name} {method}: {'OM' if t is None else f'{t:.3f}s'}")
    if args.out is not None:
        _write_csv(args.out / "spectral_bench.csv", ["dataset", "n", "d", "m", "c", "method", "seconds", "speedup_vs_sc"], rows)


ABLATION_ROWS = ((False, False), (True, False), (True, True))


def cmd_ablate(args) -> None:
    doc, hyper = _settings(args)
    graph = _graph(doc, args.data_dir)
    h = homophily_ratio(graph) if graph.n_edges else None
    rows = []
    for use_A, use_Astar in ABLATION_ROWS:
        summary = run_experiment(graph, replace(hyper, use_A=use_A, use_Astar=use_Astar), runs=doc["runs"])
        rows.append([int(use_A), int(use_Astar), _num(summary.acc_mean), _num(summary.acc_std), _num(h), hyper.K, _num(hyper.eps)])
        print(f"A={int(use_A)} A_star={int(use_Astar)}: acc_mean={summary.acc_mean:.4f} acc_std={summary.acc_std:.4f}")
    if args.out is not None:
        _write_csv(args.out / "ablation.csv", ["A", "A_star", "acc_mean", "acc_std", "h", "K", "eps"], rows)
        _metadata(args.out, {"dataset": doc["dataset"]})


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "spectral-bench": cmd_spectral_bench,
    "homophily": cmd_homophily,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetero-gnn", description="GCN with learned re-connected adjacency")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--dataset")
        p.add_argument("--data-dir", type=Path, default=None)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        if name in ("eval", "homophily"):
            p.add_argument("--checkpoint", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command in ("train", "ablate") and args.out is None:
            raise ConfigError(f"{args.command} needs --out")
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
