"""Convert raw benchmark graph dumps into the package's TSV node/edge format.

Supported raw layouts:

* ``cora``: the LINQS ``cora.content`` / ``cora.cites`` pair.
* ``planetoid``: the ``ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}``
  pickles (Citeseer, Pubmed).
* ``geom``: ``out1_node_feature_label.txt`` / ``out1_graph_edges.txt``
  (WebKB and Wikipedia graphs).

Output files are gzip-compressed and written with a fixed mtime so the
conversion is byte-reproducible::

    python tools/convert_raw_datasets.py cora path/to/cora data/cora
    python tools/convert_raw_datasets.py planetoid path/to/citeseer data/citeseer --name citeseer
    python tools/convert_raw_datasets.py geom path/to/texas data/texas
"""

from __future__ import annotations

import argparse
import gzip
import io
import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _fmt(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_tsv(prefix: Path, features: np.ndarray, labels: np.ndarray, edges) -> None:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for i, (row, y) in enumerate(zip(features, labels)):
        buf.write(f"{i}\t{','.join(_fmt(v) for v in row)}\t{int(y)}\n")
    _write_gz(prefix.with_name(prefix.name + ".nodes.tsv.gz"), buf.getvalue())
    buf = io.StringIO()
    for s, d in edges:
        buf.write(f"{int(s)}\t{int(d)}\n")
    _write_gz(prefix.with_name(prefix.name + ".edges.tsv.gz"), buf.getvalue())


def _write_gz(path: Path, text: str) -> None:
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
        gz.write(text.encode("utf-8"))


def convert_cora(src: Path):
    ids, feats, names = [], [], []
    for line in (src / "cora.content").read_text().splitlines():
        parts = line.split()
        ids.append(parts[0])
        feats.append([float(v) for v in parts[1:-1]])
        names.append(parts[-1])
    classes = sorted(set(names))
    index = {pid: i for i, pid in enumerate(ids)}
    labels = np.array([classes.index(c) for c in names])
    edges = []
    for line in (src / "cora.cites").read_text().splitlines():
        cited, citing = line.split()
        edges.append((index[citing], index[cited]))
    return np.array(feats), labels, edges


def _load_pickle(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert_planetoid(src: Path, name: str):
    load = {k: _load_pickle(src / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_idx = np.loadtxt(src / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)
    tx, ty = load["tx"], load["ty"]
    # citeseer has isolated test nodes missing from tx/ty; pad them with zeros
    full = np.arange(test_sorted.min(), test_sorted.max() + 1)
    tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
    tx_ext[test_sorted - test_sorted.min(), :] = tx
    ty_ext = np.zeros((len(full), ty.shape[1]))
    ty_ext[test_sorted - test_sorted.min(), :] = ty
    features = sp.vstack([load["allx"], tx_ext.tocsr()]).tolil()
    labels = np.vstack([load["ally"], ty_ext])
    features[test_idx, :] = features[test_sorted, :]
    labels[test_idx, :] = labels[test_sorted, :]
    features = np.asarray(features.todense())
    labels = labels.argmax(axis=1)
    graph = load["graph"]
    pairs = sorted({(min(s, d), max(s, d)) for s, ds in graph.items() for d in ds})
    return features, labels, pairs


def convert_geom(src: Path):
    feats, labels = {}, {}
    lines = (src / "out1_node_feature_label.txt").read_text().splitlines()[1:]
    for line in lines:
        nid, f, y = line.split("\t")
        feats[int(nid)] = [float(v) for v in f.split(",")]
        labels[int(nid)] = int(y)
    order = sorted(feats)
    edges = []
    for line in (src / "out1_graph_edges.txt").read_text().splitlines()[1:]:
        s, d = line.split("\t")
        edges.append((int(s), int(d)))
    return np.array([feats[i] for i in order]), np.array([labels[i] for i in order]), edges


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("layout", choices=["cora", "planetoid", "geom"])
    ap.add_argument("src", type=Path)
    ap.add_argument("dest", type=Path, help="output prefix, e.g. data/cora")
    ap.add_argument("--name", default=None, help="planetoid dataset name")
    args = ap.parse_args(argv)
    if args.layout == "cora":
        out = convert_cora(args.src)
    elif args.layout == "planetoid":
        out = convert_planetoid(args.src, args.name or args.dest.name)
    else:
        out = convert_geom(args.src)
    write_tsv(args.dest, *out)


if __name__ == "__main__":
    main()
