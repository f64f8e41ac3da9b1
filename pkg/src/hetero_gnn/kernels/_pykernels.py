"""Pure numpy/scipy versions of the compiled kernels.

Signatures and output ordering match ``_ckernels`` exactly; only the
floating-point summation order may differ.
"""

import numpy as np
import scipy.sparse as sp

_BLOCK = 1024


def spmm(indptr, indices, data, dense):
    n = len(indptr) - 1
    a = sp.csr_matrix((data, indices, indptr), shape=(n, dense.shape[0]))
    return np.ascontiguousarray(a @ dense)


def sddmm(indptr, indices, left, right):
    rows = np.repeat(np.arange(len(indptr) - 1, dtype=np.int64), np.diff(indptr))
    out = np.empty(len(indices), dtype=np.float64)
    step = max(1, (1 << 22) // max(1, left.shape[1]))
    for s in range(0, len(indices), step):
        e = s + step
        out[s:e] = np.einsum("ij,ij->i", left[rows[s:e]], right[indices[s:e]])
    return out


def threshold_upper(unit, eps):
    n = unit.shape[0]
    rows, cols, vals = [], [], []
    for r0 in range(0, n, _BLOCK):
        r1 = min(n, r0 + _BLOCK)
        block = unit[r0:r1] @ unit[r0:].T
        # keep only j > i inside the block
        local = np.arange(r1 - r0)[:, None]
        offset = np.arange(n - r0)[None, :]
        keep = (offset > local) & (block >= eps)
        i, j = np.nonzero(keep)
        rows.append((i + r0).astype(np.int32))
        cols.append((j + r0).astype(np.int32))
        vals.append(block[i, j])
    if not rows:
        return np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
