# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled inner loops for CSR products and cosine thresholding.

All loops accumulate in a fixed order so results are bit-reproducible.
"""

import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector

cnp.import_array()


def spmm(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
         const double[::1] data, const double[:, ::1] dense):
    """Return ``A @ dense`` for CSR ``A`` given by (indptr, indices, data)."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k = dense.shape[1]
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c
    cdef cnp.int32_t p
    cdef double v
    cdef double* o
    cdef const double* src
    if n == 0 or k == 0:
        return out_arr
    with nogil:
        for i in range(n):
            o = &out[i, 0]
            for p in range(indptr[i], indptr[i + 1]):
                v = data[p]
                src = &dense[indices[p], 0]
                for c in range(k):
                    o[c] += v * src[c]
    return out_arr


def sddmm(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
          const double[:, ::1] left, const double[:, ::1] right):
    """Dot products ``left[i] . right[j]`` for every stored (i, j)."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k = left.shape[1]
    out_arr = np.empty(indices.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, c
    cdef cnp.int32_t p, j
    cdef double acc
    with nogil:
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                acc = 0.0
                for c in range(k):
                    acc = acc + left[i, c] * right[j, c]
                out[p] = acc
    return out_arr


def threshold_upper(const double[:, ::1] unit, double eps):
    """Strict upper-triangle pairs (i < j) with ``unit[i] . unit[j] >= eps``.

    Returns (rows, cols, vals) as flat arrays ordered by (i, j).  Each dot
    product is summed over features in index order.
    """
    cdef Py_ssize_t n = unit.shape[0]
    cdef Py_ssize_t k = unit.shape[1]
    # feature-major copy so the inner loop runs over contiguous j
    cdef double[:, ::1] ut = np.ascontiguousarray(np.asarray(unit).T)
    cdef double[::1] acc = np.empty(n, dtype=np.float64)
    cdef vector[cnp.int32_t] rows
    cdef vector[cnp.int32_t] cols
    cdef vector[double] vals
    cdef Py_ssize_t i, j, c
    cdef double uic
    cdef double* a = &acc[0]
    cdef const double* col
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                a[j] = 0.0
            for c in range(k):
                uic = unit[i, c]
                col = &ut[c, 0]
                for j in range(i + 1, n):
                    a[j] = a[j] + uic * col[j]
            for j in range(i + 1, n):
                if a[j] >= eps:
                    rows.push_back(<cnp.int32_t>i)
                    cols.push_back(<cnp.int32_t>j)
                    vals.push_back(a[j])
    cdef Py_ssize_t m = rows.size()
    r = np.empty(m, dtype=np.int32)
    cc = np.empty(m, dtype=np.int32)
    v = np.empty(m, dtype=np.float64)
    cdef cnp.int32_t[::1] rv = r
    cdef cnp.int32_t[::1] cv = cc
    cdef double[::1] vv = v
    for i in range(m):
        rv[i] = rows[i]
        cv[i] = cols[i]
        vv[i] = vals[i]
    return r, cc, v
