"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line (printed in the terminal summary).  A
criterion whose dataset is not on disk fails with the reason; it is never
skipped.
"""

import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gradcheck import relative_errors, small_instance
from hetero_gnn import datasets, spectral, train
from hetero_gnn.graph_core import homophily_ratio
from hetero_gnn.spectral import AnchorSet, esc, esc_anch, principal_angles, sc_dense

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_H = {"cora": 0.81, "citeseer": 0.74, "texas": 0.11, "wisconsin": 0.21}


def hyper(name, **overrides):
    doc = train.load_config(ROOT / "configs" / f"{name}.json")
    return replace(train.hyper_from_mapping(doc), **overrides)


def missing(names):
    return [n for n in names if not datasets.available(n)]


@pytest.fixture(scope="module")
def cora_runs():
    """Ten Cora runs with and without the re-connected adjacency (shared by 5 and 7)."""
    if not datasets.available("cora"):
        return None
    g = datasets.load("cora")
    h = hyper("cora")
    return {
        "both": train.run_experiment(g, h, runs=10),
        "A_only": train.run_experiment(g, replace(h, use_Astar=False), runs=10),
    }


def test_criterion_1_homophily_ratios(acceptance):
    parts, ok = [], True
    for name, target in REFERENCE_H.items():
        if not datasets.available(name):
            parts.append(f"{name}: data missing")
            ok = False
            continue
        h = homophily_ratio(datasets.load(name))
        good = abs(h - target) <= 0.02
        ok &= good
        parts.append(f"{name} h={h:.4f} (target {target}±0.02)")
    acceptance(1, ok, "; ".join(parts))
    assert ok, parts


def dense_subspace(S, c):
    deg = S.sum(axis=1)
    G = S / np.sqrt(np.outer(deg, deg))
    return np.linalg.eigh(G)[1][:, ::-1][:, :c]


def test_criterion_2_spectral_oracle(acceptance):
    worst_esc = worst_anch = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(50, 301)), int(rng.integers(10, 80))
        X = rng.random((n, d)) * (rng.random((n, d)) < 0.4)
        X[np.arange(n), rng.integers(0, d, n)] += 1.0
        c = int(rng.integers(2, 8))
        worst_esc = max(worst_esc, principal_angles(esc(X, c).F, dense_subspace(X @ X.T, c)).max())
        U = X / np.linalg.norm(X, axis=1, keepdims=True)
        R = U @ U.T
        F = esc_anch(X, AnchorSet(np.arange(n)), c).F
        worst_anch = max(worst_anch, principal_angles(F, dense_subspace(R @ R.T, c)).max())
    ok = worst_esc < 1e-8 and worst_anch < 1e-6
    acceptance(2, ok, f"max principal angle esc={worst_esc:.2e} (<1e-8), esc_anch={worst_anch:.2e} (<1e-6)")
    assert ok


def test_criterion_3_esc_anch_speed(acceptance):
    X = datasets.synth_bag_of_words(5201, 2089, 0.02, seed=0)
    sigma = spectral.median_pairwise_distance(X)
    t0 = time.perf_counter()
    esc_anch(X, 400, 15, seed=0)
    t_anch = time.perf_counter() - t0
    t0 = time.perf_counter()
    sc_dense(X, 15, sigma)
    t_sc = time.perf_counter() - t0
    ratio = t_sc / t_anch
    ok = ratio >= 10
    acceptance(3, ok, f"esc_anch {t_anch:.2f}s vs sc_dense {t_sc:.2f}s: {ratio:.1f}x (>=10x)")
    assert ok


def test_criterion_4_gradients(acceptance):
    worst = {}
    configs = [(0, "cc", 1), (1, "cc", 2), (2, "av", 2), (3, "av", 3), (4, "cc", 4), (5, "av", 1)]
    for seed, combine, K in configs:
        for name, err in relative_errors(*small_instance(seed, K=K, combine=combine)).items():
            worst[name] = max(worst.get(name, 0.0), err)
    ok = len(worst) == 5 and max(worst.values()) < 1e-4
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    acceptance(4, ok, f"{len(configs)} instances of 12 nodes, max rel. error {detail} (<1e-4)")
    assert ok


def test_criterion_5_cora_accuracy(acceptance, cora_runs):
    if cora_runs is None:
        acceptance(5, False, "cora: data missing")
        pytest.fail("cora data missing")
    s = cora_runs["both"]
    ok = s.acc_mean >= 0.86
    acceptance(5, ok, f"Cora A+A* (cc) 10 runs: {100 * s.acc_mean:.2f} ± {100 * s.acc_std:.2f} (>= 86)")
    assert ok


def test_criterion_6_webkb_accuracy(acceptance):
    absent = missing(["texas", "cornell"])
    if absent:
        acceptance(6, False, f"data missing for {', '.join(absent)}")
        pytest.fail(f"WebKB data missing: {absent}")
    parts, ok = [], True
    for name in ("texas", "cornell"):
        s = train.run_experiment(datasets.load(name), hyper(name), runs=10)
        ok &= s.acc_mean >= 0.78
        parts.append(f"{name} {100 * s.acc_mean:.2f} ± {100 * s.acc_std:.2f}")
    acceptance(6, ok, "; ".join(parts) + " (>= 78 each)")
    assert ok


def test_criterion_7_ablation(acceptance, cora_runs):
    parts, ok = [], True
    if cora_runs is None:
        parts.append("cora: data missing")
        ok = False
    else:
        both, a_only = cora_runs["both"].acc_mean, cora_runs["A_only"].acc_mean
        gap = 100 * (both - a_only)
        ok &= abs(gap) < 2
        parts.append(f"Cora A={100 * a_only:.2f} A+A*={100 * both:.2f} change {gap:+.2f} (|.|<2)")
    if datasets.available("texas"):
        g, h = datasets.load("texas"), hyper("texas")
        both = train.run_experiment(g, h, runs=10).acc_mean
        a_only = train.run_experiment(g, replace(h, use_Astar=False), runs=10).acc_mean
        gain = 100 * (both - a_only)
        ok &= gain >= 2
        parts.append(f"Texas A={100 * a_only:.2f} A+A*={100 * both:.2f} gain {gain:+.2f} (>=2)")
    else:
        parts.append("texas: data missing")
        ok = False
    acceptance(7, ok, "; ".join(parts))
    assert ok, parts


def test_criterion_8_reconnected_homophily(acceptance):
    if not datasets.available("texas"):
        acceptance(8, False, "texas: data missing")
        pytest.fail("texas data missing")
    g = datasets.load("texas")
    h0 = homophily_ratio(g)
    r = train.fit(g, hyper("texas"))
    h_star = r.astar_h_final
    ok = h_star is not None and h_star >= h0 + 0.2
    acceptance(8, ok, f"Texas h={h0:.3f}, A* off-diagonal h={h_star} (>= h + 0.2)")
    assert ok


PROPERTY_SUITES = [
    "test_graph_core.py", "test_datasets.py", "test_spectral.py", "test_structure_learn.py",
    "test_model.py", "test_train.py", "test_kernels.py", "test_cli.py",
]


def test_criterion_9_property_suites(acceptance):
    files = [str(ROOT / "tests" / f) for f in PROPERTY_SUITES]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files],
        capture_output=True, text=True, cwd=ROOT,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    acceptance(9, ok, f"module invariant suites: {summary}")
    assert ok, proc.stdout[-3000:]
