"""Time the compiled kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--n 2708] [--repeat 5] [--csv out.csv]

Sizes default to Cora scale: n nodes, a symmetric normalized adjacency
with ~4 neighbours per node, a 64-wide hidden matrix, and unit rows of
width 16 thresholded at 0.9 (the similarity-graph step).
"""

import argparse
import csv
import sys
import time

import numpy as np
import scipy.sparse as sp

from hetero_gnn.kernels import _pykernels

try:
    from hetero_gnn.kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(n, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=4.0 / n, random_state=seed, format="csr")
    A = (A + A.T + sp.identity(n)).tocsr()
    A.sort_indices()
    indptr, indices, data = A.indptr.astype(np.int32), A.indices.astype(np.int32), A.data
    H = rng.standard_normal((n, 64))
    Y = rng.standard_normal((n, 16)) + 2.0  # positive mean, so some pairs pass 0.9
    U = np.ascontiguousarray(Y / np.linalg.norm(Y, axis=1, keepdims=True))
    return {
        "spmm": lambda k: k.spmm(indptr, indices, data, H),
        "sddmm": lambda k: k.sddmm(indptr, indices, U, U),
        "threshold_upper": lambda k: k.threshold_upper(U, 0.9),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2708)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rows = []
    for name, run in workloads(args.n, args.seed).items():
        tc = best_of(lambda: run(_ckernels), args.repeat)
        tp = best_of(lambda: run(_pykernels), args.repeat)
        rows.append((name, args.n, tc, tp, tp / tc))
    print(f"{'kernel':<16} {'n':>6} {'cython_s':>10} {'python_s':>10} {'speedup':>8}")
    for name, n, tc, tp, ratio in rows:
        print(f"{name:<16} {n:>6} {tc:>10.4f} {tp:>10.4f} {ratio:>8.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "n", "cython_seconds", "python_seconds", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
