import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hetero_gnn import kernels
from hetero_gnn.kernels import _pykernels

try:
    from hetero_gnn.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def random_csr(n, k, density, seed):
    m = sp.random(n, k, density=density, random_state=seed, format="csr")
    m.sort_indices()
    return m.indptr.astype(np.int32), m.indices.astype(np.int32), m.data, m


def unit_rows(n, p, seed):
    Y = np.random.default_rng(seed).standard_normal((n, p))
    return np.ascontiguousarray(Y / np.linalg.norm(Y, axis=1, keepdims=True))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_spmm_against_scipy(impl):
    indptr, indices, data, m = random_csr(50, 40, 0.1, 0)
    dense = np.random.default_rng(1).standard_normal((40, 7))
    np.testing.assert_allclose(impl.spmm(indptr, indices, data, dense), m @ dense, atol=1e-13)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_sddmm_against_dense(impl):
    indptr, indices, _, m = random_csr(30, 30, 0.2, 2)
    rng = np.random.default_rng(3)
    L, R = rng.standard_normal((30, 5)), rng.standard_normal((30, 5))
    coo = m.tocoo()
    np.testing.assert_allclose(impl.sddmm(indptr, indices, L, R), (L @ R.T)[coo.row, coo.col], atol=1e-13)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_threshold_upper_against_dense(impl):
    U = unit_rows(70, 4, 4)
    r, c, v = impl.threshold_upper(U, 0.5)
    S = U @ U.T
    i, j = np.nonzero(np.triu(S >= 0.5, k=1))
    assert np.array_equal(r, i) and np.array_equal(c, j)
    np.testing.assert_allclose(v, S[i, j], atol=1e-14)
    assert r.dtype == np.int32 and c.dtype == np.int32


def test_threshold_empty_and_tiny():
    for impl in BACKENDS:
        r, c, v = impl.threshold_upper(unit_rows(1, 3, 0), 0.0)
        assert len(r) == len(c) == len(v) == 0
        r, c, v = impl.threshold_upper(unit_rows(5, 3, 0), 2.0)
        assert len(r) == 0


@needs_c
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(1, 12), st.floats(-1.0, 1.0), st.integers(0, 10_000))
def test_backends_agree_threshold(n, p, eps, seed):
    U = unit_rows(n, p, seed)
    rc, cc, vc = _ckernels.threshold_upper(U, eps)
    rp, cp, vp = _pykernels.threshold_upper(U, eps)
    a = dict(zip(zip(rc.tolist(), cc.tolist()), vc))
    b = dict(zip(zip(rp.tolist(), cp.tolist()), vp))
    # pairs may only disagree when the similarity sits on the threshold to rounding
    for key in set(a) ^ set(b):
        assert abs(a.get(key, b.get(key)) - eps) < 1e-12
    for key in set(a) & set(b):
        assert abs(a[key] - b[key]) < 1e-14


@needs_c
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(1, 10), st.integers(0, 10_000))
def test_backends_agree_products(n, k, seed):
    indptr, indices, data, _ = random_csr(n, n, min(1.0, 4 / n), seed)
    dense = np.random.default_rng(seed).standard_normal((n, k))
    np.testing.assert_allclose(_ckernels.spmm(indptr, indices, data, dense), _pykernels.spmm(indptr, indices, data, dense), atol=1e-13)
    np.testing.assert_allclose(
        _ckernels.sddmm(indptr, indices, dense, dense), _pykernels.sddmm(indptr, indices, dense, dense), atol=1e-12
    )


@needs_c
def test_compiled_spmm_bit_deterministic():
    indptr, indices, data, _ = random_csr(500, 500, 0.02, 5)
    dense = np.random.default_rng(6).standard_normal((500, 16))
    a = _ckernels.spmm(indptr, indices, data, dense)
    assert np.array_equal(a, _ckernels.spmm(indptr, indices, data, dense))


def test_env_forces_fallback():
    code = "from hetero_gnn import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "HETERO_GNN_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")
