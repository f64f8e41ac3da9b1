"""Benchmark graph loading and synthetic graph generation.

On-disk format (UTF-8, LF, 0-based ids), optionally gzip-compressed when
the file name ends in ``.gz``::

    <name>.nodes.tsv   node_id<TAB>f_1,f_2,...,f_d<TAB>label
    <name>.edges.tsv   src<TAB>dst
"""

from __future__ import annotations

import gzip
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParamError, ValidationError
from .graph_core import Graph

DATA_ENV = "HETERO_GNN_DATA"


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    node_file: Path
    edge_file: Path
    expected_nodes: int | None = None
    # compared with the number of edge-file records, before symmetrization
    expected_edges: int | None = None
    expected_features: int | None = None
    expected_classes: int | None = None


# Published dimensions.  Edge counts are only pinned where the raw edge
# file reproduces the published tally record-for-record.
KNOWN_DATASETS = {
    "cora": dict(expected_nodes=2708, expected_edges=5429, expected_features=1433, expected_classes=7),
    "citeseer": dict(expected_nodes=3327, expected_features=3703, expected_classes=6),
    "pubmed": dict(expected_nodes=19717, expected_features=500, expected_classes=3),
    "squirrel": dict(expected_nodes=5201, expected_features=2089, expected_classes=5),
    "chameleon": dict(expected_nodes=2277, expected_features=2325, expected_classes=5),
    "cornell": dict(expected_nodes=183, expected_features=1703, expected_classes=5),
    "texas": dict(expected_nodes=183, expected_features=1703, expected_classes=5),
    "wisconsin": dict(expected_nodes=251, expected_features=1703, expected_classes=5),
}


def default_data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    # source checkout: <repo>/data
    return Path(__file__).resolve().parents[2] / "data"


def _find(base: Path, stem: str) -> Path:
    for suffix in ("", ".gz"):
        p = base / f"{stem}{suffix}"
        if p.exists():
            return p
    return base / stem


def descriptor(name: str, data_dir: str | Path | None = None) -> DatasetDescriptor:
    """Descriptor for a named dataset stored as ``<data_dir>/<name>.{nodes,edges}.tsv[.gz]``."""
    base = Path(data_dir) if data_dir is not None else default_data_dir()
    key = name.lower()
    return DatasetDescriptor(
        name=key,
        node_file=_find(base, f"{key}.nodes.tsv"),
        edge_file=_find(base, f"{key}.edges.tsv"),
        **KNOWN_DATASETS.get(key, {}),
    )


def available(name: str, data_dir=None) -> bool:
    d = descriptor(name, data_dir)
    return d.node_file.exists() and d.edge_file.exists()


def _read_lines(path: Path) -> list[str]:
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rt", encoding="utf-8", newline="\n") as fh:
            return fh.read().splitlines()
    except FileNotFoundError:
        raise
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load_graph(desc: DatasetDescriptor) -> Graph:
    """Parse the node and edge files of ``desc`` into a validated Graph."""
    node_lines = [ln for ln in _read_lines(Path(desc.node_file)) if ln.strip()]
    n = len(node_lines)
    ids = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    rows = []
    for k, line in enumerate(node_lines):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{desc.node_file}:{k + 1}: expected 3 tab-separated fields")
        try:
            ids[k] = int(parts[0])
            labels[k] = int(parts[2])
            rows.append(np.array(parts[1].split(","), dtype=np.float64) if parts[1] else np.empty(0))
        except ValueError as exc:
            raise FormatError(f"{desc.node_file}:{k + 1}: {exc}") from exc
    if sorted(ids.tolist()) != list(range(n)):
        raise FormatError(f"{desc.node_file}: node ids must be exactly 0..{n - 1}")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise FormatError(f"{desc.node_file}: rows have differing feature counts {sorted(widths)}")
    d = widths.pop() if widths else 0
    features = np.zeros((n, d))
    features[ids] = np.stack(rows) if rows else features
    y = np.empty(n, dtype=np.int64)
    y[ids] = labels

    edges = []
    for k, line in enumerate(_read_lines(Path(desc.edge_file))):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{desc.edge_file}:{k + 1}: expected 2 tab-separated fields")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise FormatError(f"{desc.edge_file}:{k + 1}: {exc}") from exc
    if edges and (min(min(e) for e in edges) < 0 or max(max(e) for e in edges) >= n):
        raise FormatError(f"{desc.edge_file}: edge endpoint outside 0..{n - 1}")

    if n and y.min() < 0:
        raise FormatError(f"{desc.node_file}: negative label")
    classes = int(y.max()) + 1 if n else 0
    checks = [
        ("nodes", desc.expected_nodes, n),
        ("edges", desc.expected_edges, len(edges)),
        ("features", desc.expected_features, d),
        ("classes", desc.expected_classes, classes),
    ]
    for what, expected, got in checks:
        if expected is not None and expected != got:
            raise ValidationError(f"{desc.name}: expected {expected} {what}, found {got}")
    if desc.expected_classes is not None:
        classes = desc.expected_classes
    return Graph.from_edges(n, edges, features, y, classes)


class DatasetMissing(FileNotFoundError):
    pass


def load(name: str, data_dir=None) -> Graph:
    d = descriptor(name, data_dir)
    for f in (d.node_file, d.edge_file):
        if not f.exists():
            raise DatasetMissing(
                f"dataset '{name}' not found: {f} (convert raw files with tools/convert_raw_datasets.py "
                "and point HETERO_GNN_DATA or --data-dir at the output)"
            )
    return load_graph(d)


def graph_fingerprint(graph: Graph) -> str:
    """Stable hash of a graph's arrays (used for cache keys and determinism checks)."""
    h = hashlib.sha256()
    for arr in (graph.adjacency.indptr, graph.adjacency.indices, graph.features, graph.labels):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(str(graph.class_count).encode())
    return h.hexdigest()


def synth_graph(
    n: int,
    classes: int,
    d: int,
    target_h: float,
    seed: int,
    avg_degree: float = 4.0,
    noise: float = 0.1,
) -> Graph:
    """Random graph whose intra-class edge fraction is ``target_h``.

    Labels are assigned round-robin.  Features are an orthonormal class
    centroid plus Gaussian noise.  The number of edges is
    ``round(n * avg_degree / 2)`` and exactly ``round(target_h * E)`` of
    them join same-class nodes.
    """
    if classes < 1 or n < classes:
        raise ParamError(f"need 1 <= classes <= n, got classes={classes}, n={n}")
    if d < classes:
        raise ParamError(f"orthogonal centroids need d >= classes, got d={d}")
    if not 0.0 <= target_h <= 1.0:
        raise ParamError(f"target_h must lie in [0, 1], got {target_h}")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    q, _ = np.linalg.qr(rng.standard_normal((d, classes)))
    centroids = q.T
    features = centroids[labels] + noise * rng.standard_normal((n, d))

    n_edges = int(round(n * avg_degree / 2))
    n_intra = int(round(target_h * n_edges))
    n_inter = n_edges - n_intra
    members = [np.flatnonzero(labels == c) for c in range(classes)]
    sizes = np.array([len(m) for m in members])
    intra_cap = int((sizes * (sizes - 1) // 2).sum())
    inter_cap = n * (n - 1) // 2 - intra_cap
    if n_intra > intra_cap or n_inter > inter_cap:
        raise ParamError(
            f"cannot draw {n_intra} intra / {n_inter} inter edges "
            f"(capacity {intra_cap} / {inter_cap})"
        )
    seen: set[tuple[int, int]] = set()
    edges = []

    def draw(count, same):
        while count:
            u, v = (int(x) for x in rng.integers(0, n, size=2))
            if u == v or (labels[u] == labels[v]) != same:
                continue
            key = (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            edges.append(key)
            count -= 1

    draw(n_intra, True)
    draw(n_inter, False)
    return Graph.from_edges(n, edges, features, labels, classes)


def synth_bag_of_words(n: int, d: int, density: float, seed: int) -> np.ndarray:
    """Sparse nonnegative count-like matrix for spectral benchmarks.

    Column 0 acts as a stop word present in every row, so every node has a
    positive cosine with every anchor.
    """
    if d < 2 or not 0.0 < density <= 1.0:
        raise ParamError(f"need d >= 2 and density in (0, 1], got d={d}, density={density}")
    rng = np.random.default_rng(seed)
    X = (rng.random((n, d)) < density) * rng.integers(1, 4, size=(n, d)).astype(np.float64)
    X[:, 0] = rng.integers(1, 4, size=n)
    return X
