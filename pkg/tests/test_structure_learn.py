import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hetero_gnn import datasets
from hetero_gnn.errors import NormError, ParamError
from hetero_gnn.graph_core import homophily_ratio
from hetero_gnn.structure_learn import (
    SimilarityHead,
    build_reconnected,
    learned_cosine_similarity,
    preprocess_features,
    reconnect_on_support,
    write_support_csv,
)


def naive_cosine(X, Q):
    Y = X @ Q
    n = len(Y)
    S = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = sum(Y[i, k] * Y[j, k] for k in range(Y.shape[1])) / (
                np.sqrt(sum(v * v for v in Y[i])) * np.sqrt(sum(v * v for v in Y[j]))
            )
    return S


def test_preprocess_examples():
    X = np.zeros((3, 4))
    X_aug, j = preprocess_features(X, seed=0)
    assert np.all(X_aug[:, j] == 0.5)
    assert np.all(np.delete(X_aug, j, axis=1) == 0)
    assert preprocess_features(X, seed=0)[1] == j
    assert np.array_equal(X, np.zeros((3, 4)))  # input untouched


def test_formerly_zero_rows_become_identical():
    X = np.array([[0, 0, 0], [0, 0, 0], [1, 2, 0]], dtype=float)
    X_aug, _ = preprocess_features(X, seed=3)
    S = learned_cosine_similarity(X_aug, SimilarityHead(np.eye(3), 0.5))
    assert S[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_cosine_examples():
    head = SimilarityHead(np.eye(2), 0.5)
    assert learned_cosine_similarity(np.array([[1.0, 0], [0, 1.0]]), head)[0, 1] == 0
    assert learned_cosine_similarity(np.array([[1.0, 1.0], [2.0, 2.0]]), head)[0, 1] == pytest.approx(1, abs=1e-15)


def test_cosine_matches_naive_oracle():
    rng = np.random.default_rng(0)
    X, Q = rng.standard_normal((20, 5)), rng.standard_normal((5, 3))
    S = learned_cosine_similarity(X, SimilarityHead(Q, 0.1))
    assert np.abs(S - naive_cosine(X, Q)).max() < 1e-12
    assert np.array_equal(S, S.T) and np.all(np.diag(S) == 1)


def test_zero_norm_projection():
    with pytest.raises(NormError):
        learned_cosine_similarity(np.array([[1.0, 0], [0, 0]]), SimilarityHead(np.eye(2), 0.5))


def test_head_validation():
    with pytest.raises(ParamError):
        SimilarityHead(np.eye(2), -0.1)
    with pytest.raises(ParamError):
        SimilarityHead(np.array([[np.nan]]), 0.1)


def test_diag_only_support():
    # S = [[1, 0.3], [0.3, 1]]
    X = np.array([[1.0, 0.0], [0.3, np.sqrt(1 - 0.09)]])
    r = build_reconnected(X, SimilarityHead(np.eye(2), 0.5))
    assert r.A_star.nnz == 2
    np.testing.assert_array_equal(r.A_star_norm.toarray(), np.eye(2))


def test_eps_zero_keeps_nonnegative_pairs():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((15, 4))
    head = SimilarityHead(rng.standard_normal((4, 4)), 0.0)
    r = build_reconnected(X, head)
    S = learned_cosine_similarity(X, head)
    np.testing.assert_array_equal(r.A_star.toarray() != 0, S >= 0)


def test_reconnected_homophily_exceeds_original():
    g = datasets.synth_graph(200, 2, 16, 0.2, seed=0)
    r = build_reconnected(g.features, SimilarityHead(np.eye(16), 0.8))
    assert r.homophily(g.labels) > homophily_ratio(g)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(1, 8), st.floats(0.0, 1.0), st.integers(0, 10_000))
def test_threshold_symmetry_scale_invariance(n, p, eps, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 6))
    head = SimilarityHead(rng.standard_normal((6, p)), eps)
    r = build_reconnected(X, head)
    A = r.A_star
    assert A.data.min() >= eps
    assert (A != A.T).nnz == 0
    assert np.all(A.diagonal() == 1)
    r2 = build_reconnected(2 * X, head)
    assert np.array_equal(r2.A_star.indices, A.indices)
    np.testing.assert_allclose(r2.A_star.data, A.data, atol=1e-14)
    sums = np.asarray(r.A_star_norm.values.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-9)


def test_threshold_matches_dense_oracle():
    rng = np.random.default_rng(2)
    X = np.abs(rng.standard_normal((40, 10)))
    head = SimilarityHead(rng.standard_normal((10, 6)), 0.7)
    S = naive_cosine(X, head.Q)
    r = build_reconnected(X, head)
    expect = np.where(S >= 0.7, S, 0)
    np.fill_diagonal(expect, 1)
    assert np.abs(r.A_star.toarray() - expect).max() < 1e-12


def test_reconnect_on_support_reproduces_values():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 5))
    head = SimilarityHead(rng.standard_normal((5, 4)), 0.4)
    r = build_reconnected(X, head)
    r2 = reconnect_on_support(X, head.Q, r.A_star)
    assert np.abs((r2.A_star - r.A_star).toarray()).max() < 1e-14
    # a perturbed Q keeps the pattern fixed (straight-through support)
    r3 = reconnect_on_support(X, head.Q + 1e-3 * rng.standard_normal((5, 4)), r.A_star)
    assert np.array_equal(r3.A_star.indices, r.A_star.indices)


def test_support_csv(tmp_path):
    X = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]])
    r = build_reconnected(X, SimilarityHead(np.eye(2), 0.9))
    write_support_csv(tmp_path / "s.csv", r)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "i,j,similarity"
    assert len(lines) == 2 and lines[1].startswith("0,1,")
    assert sp.triu(r.A_star, 1).nnz == 1
