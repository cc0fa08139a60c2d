# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels for the chunk-statistics pipeline.

Single fused passes over the (n_samples, total_dims) sample matrix; the
numpy fallback in ``_kernels_np`` implements the same contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def chunk_means_batch(double[:, ::1] values, Py_ssize_t chunk_size):
    """Per-sample chunk means: (n, k*chunk_size) -> (n, k)."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t total = values.shape[1]
    cdef Py_ssize_t k = total // chunk_size
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c, j, base, end
    # four independent accumulation chains so the loop vectorizes
    cdef double a0, a1, a2, a3
    cdef double inv = 1.0 / chunk_size
    for i in range(n):
        for c in range(k):
            base = c * chunk_size
            end = base + chunk_size
            a0 = a1 = a2 = a3 = 0.0
            j = base
            while j + 4 <= end:
                a0 += values[i, j]
                a1 += values[i, j + 1]
                a2 += values[i, j + 2]
                a3 += values[i, j + 3]
                j += 4
            while j < end:
                a0 += values[i, j]
                j += 1
            out[i, c] = ((a0 + a1) + (a2 + a3)) * inv
    return out_arr


def group_mean_var(double[:, ::1] chunk_means, cnp.intp_t[::1] rows):
    """Column-wise sample mean and unbiased variance over the given rows.

    Two-pass computation; requires len(rows) >= 2.
    """
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t k = chunk_means.shape[1]
    if m < 2:
        raise ValueError("group_mean_var needs at least 2 rows")
    mean_arr = np.zeros(k, dtype=np.float64)
    var_arr = np.zeros(k, dtype=np.float64)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef Py_ssize_t i, c, r
    cdef double d
    cdef double inv_m = 1.0 / m
    cdef double inv_m1 = 1.0 / (m - 1)
    for i in range(m):
        r = rows[i]
        for c in range(k):
            mean[c] += chunk_means[r, c]
    for c in range(k):
        mean[c] *= inv_m
    for i in range(m):
        r = rows[i]
        for c in range(k):
            d = chunk_means[r, c] - mean[c]
            var[c] += d * d
    for c in range(k):
        var[c] *= inv_m1
    return mean_arr, var_arr
