import gzip

import numpy as np
import pytest

from hetero_gnn import datasets
from hetero_gnn.datasets import DatasetDescriptor, load_graph, synth_graph
from hetero_gnn.errors import FormatError, ParamError, ValidationError
from hetero_gnn.graph_core import homophily_ratio

needs_cora = pytest.mark.skipif(not datasets.available("cora"), reason="cora files not present")


def write(tmp_path, nodes, edges, gz=False):
    nf, ef = tmp_path / "g.nodes.tsv", tmp_path / "g.edges.tsv"
    if gz:
        nf, ef = nf.with_suffix(".tsv.gz"), ef.with_suffix(".tsv.gz")
        with gzip.open(nf, "wt") as fh:
            fh.write(nodes)
        with gzip.open(ef, "wt") as fh:
            fh.write(edges)
    else:
        nf.write_text(nodes)
        ef.write_text(edges)
    return DatasetDescriptor("g", nf, ef)


def test_two_nodes_no_edges(tmp_path):
    g = load_graph(write(tmp_path, "0\t1,0\t0\n1\t0,1\t1\n", ""))
    assert g.n_nodes == 2 and g.n_edges == 0
    np.testing.assert_array_equal(g.features, [[1, 0], [0, 1]])


@pytest.mark.parametrize("gz", [False, True])
def test_edge_symmetrized(tmp_path, gz):
    g = load_graph(write(tmp_path, "0\t1\t0\n1\t2.5\t0\n", "0\t1\n", gz=gz))
    assert g.adjacency[0, 1] and g.adjacency[1, 0]
    assert g.features[1, 0] == 2.5


def test_format_errors(tmp_path):
    with pytest.raises(FormatError):
        load_graph(write(tmp_path, "0\t1,x\t0\n", ""))
    with pytest.raises(FormatError):
        load_graph(write(tmp_path, "0\t1\t0\n", "0\n"))


def test_descriptor_mismatch(tmp_path):
    d = write(tmp_path, "0\t1\t0\n1\t1\t0\n", "")
    with pytest.raises(ValidationError):
        load_graph(DatasetDescriptor("g", d.node_file, d.edge_file, expected_nodes=3))


def test_missing_dataset(tmp_path):
    with pytest.raises(FileNotFoundError, match="not found"):
        datasets.load("texas", tmp_path)


def test_load_deterministic(tmp_path):
    d = write(tmp_path, "0\t1,0\t0\n1\t0,1\t1\n2\t1,1\t1\n", "0\t1\n2\t1\n")
    assert datasets.graph_fingerprint(load_graph(d)) == datasets.graph_fingerprint(load_graph(d))


@needs_cora
def test_cora_dimensions():
    g = datasets.load("cora")
    assert (g.n_nodes, g.n_features, g.class_count) == (2708, 1433, 7)
    assert homophily_ratio(g) == pytest.approx(0.81, abs=0.01)


@pytest.mark.parametrize("h", [0.0, 1.0])
def test_synth_extremes(h):
    assert homophily_ratio(synth_graph(60, 3, 8, h, seed=1)) == h


def test_synth_n500():
    assert 0.15 <= homophily_ratio(synth_graph(500, 5, 16, 0.2, seed=0)) <= 0.25


@pytest.mark.parametrize("target", [0.1, 0.35, 0.6, 0.9])
def test_synth_within_tolerance_over_seeds(target):
    for seed in range(10):
        assert abs(homophily_ratio(synth_graph(200, 4, 8, target, seed=seed)) - target) <= 0.05


def test_synth_deterministic_and_features():
    a, b = synth_graph(50, 2, 6, 0.3, seed=4), synth_graph(50, 2, 6, 0.3, seed=4)
    assert datasets.graph_fingerprint(a) == datasets.graph_fingerprint(b)
    assert np.array_equal(a.labels, np.arange(50) % 2)
    # intra-class cosine beats inter-class on average
    U = a.features / np.linalg.norm(a.features, axis=1, keepdims=True)
    S = U @ U.T
    same = a.labels[:, None] == a.labels[None, :]
    np.fill_diagonal(same, False)
    diff = a.labels[:, None] != a.labels[None, :]
    assert S[same].mean() > S[diff].mean() + 0.5


def test_synth_infeasible():
    with pytest.raises(ParamError):
        synth_graph(3, 5, 8, 0.5, seed=0)
    with pytest.raises(ParamError):
        synth_graph(10, 2, 4, 1.5, seed=0)
