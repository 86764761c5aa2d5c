# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan backend.

Mirrors _scan_py bit for bit: sequential prefix sums, suffix running max with
ties to the smaller index, strict-improvement forward scans, and the
canonical (value, then group index, then hypothesis index) comparison. The
build compiles with contraction disabled so multiply-add sequences round
exactly like the numpy expressions.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double NEG_INF = -np.inf


cdef inline void _fill_prefix_corr(
    const double[:, ::1] base, const double[:, ::1] label_val,
    const double[:, ::1] corr, Py_ssize_t i, Py_ssize_t h, Py_ssize_t m,
    double[::1] v_row, double[::1] prefix,
) noexcept nogil:
    cdef Py_ssize_t x
    cdef double v, run = 0.0
    prefix[0] = 0.0
    for x in range(m):
        v = base[h, x] + corr[i, x] * label_val[h, x]
        v_row[x] = v
        run = run + v
        prefix[x + 1] = run


cdef inline void _scan_one_call(
    Py_ssize_t n_h, Py_ssize_t m, bint fast, Py_ssize_t n_groups,
    const long long[:, ::1] iv_bounds, const long long[::1] iv_gidx,
    const long long[::1] set_indptr, const long long[::1] set_indices,
    const long long[::1] set_gidx,
    double[::1] v_row, double[::1] prefix,
    double[::1] suf_val, long long[::1] suf_idx,
    const double[:, ::1] base, const double[:, ::1] label_val,
    const double[:, ::1] corr,
    Py_ssize_t i,
    long long* out_g, long long* out_h, double* out_val,
) noexcept nogil:
    cdef Py_ssize_t h, x, e, lo, k, s_i, j, gi, hi
    cdef double best_val = NEG_INF
    cdef long long best_g = 0, best_h = 0
    cdef double run_best, val, row_val, acc
    cdef long long run_idx, row_lo, row_hi, g
    cdef Py_ssize_t n_iv = iv_gidx.shape[0]
    cdef Py_ssize_t n_sets = set_gidx.shape[0]

    for h in range(n_h):
        _fill_prefix_corr(base, label_val, corr, i, h, m, v_row, prefix)
        if fast:
            run_best = NEG_INF
            run_idx = 0
            for e in range(m - 1, -1, -1):
                if prefix[e + 1] >= run_best:
                    run_best = prefix[e + 1]
                    run_idx = e
                suf_val[e] = run_best
                suf_idx[e] = run_idx
            row_val = NEG_INF
            row_lo = 0
            row_hi = 0
            for lo in range(m):
                val = suf_val[lo] - prefix[lo]
                if val > row_val:
                    row_val = val
                    row_lo = lo
                    row_hi = suf_idx[lo]
            g = row_lo * m - (row_lo * (row_lo - 1)) // 2 + (row_hi - row_lo)
            if row_val > best_val or (
                row_val == best_val
                and (g < best_g or (g == best_g and <long long>h < best_h))
            ):
                best_val = row_val
                best_g = g
                best_h = h
        else:
            for k in range(n_iv):
                val = prefix[iv_bounds[k, 1] + 1] - prefix[iv_bounds[k, 0]]
                g = iv_gidx[k]
                if val > best_val or (
                    val == best_val
                    and (g < best_g or (g == best_g and <long long>h < best_h))
                ):
                    best_val = val
                    best_g = g
                    best_h = h
            for s_i in range(n_sets):
                acc = 0.0
                for j in range(set_indptr[s_i], set_indptr[s_i + 1]):
                    acc = acc + v_row[set_indices[j]]
                g = set_gidx[s_i]
                if acc > best_val or (
                    acc == best_val
                    and (g < best_g or (g == best_g and <long long>h < best_h))
                ):
                    best_val = acc
                    best_g = g
                    best_h = h
    out_g[0] = best_g
    out_h[0] = best_h
    out_val[0] = best_val


def scan_corr(
    double[:, ::1] base, double[:, ::1] label_val, double[:, ::1] corr,
    long long[:, ::1] iv_bounds, long long[::1] iv_gidx,
    long long[::1] set_indptr, long long[::1] set_indices,
    long long[::1] set_gidx, bint fast, long long n_groups,
):
    cdef Py_ssize_t n_calls = corr.shape[0]
    cdef Py_ssize_t n_h = base.shape[0]
    cdef Py_ssize_t m = base.shape[1]
    out_g_arr = np.empty(n_calls, dtype=np.int64)
    out_h_arr = np.empty(n_calls, dtype=np.int64)
    out_val_arr = np.empty(n_calls, dtype=np.float64)
    cdef long long[::1] out_g = out_g_arr
    cdef long long[::1] out_h = out_h_arr
    cdef double[::1] out_val = out_val_arr
    v_row_arr = np.empty(m, dtype=np.float64)
    prefix_arr = np.empty(m + 1, dtype=np.float64)
    suf_val_arr = np.empty(m, dtype=np.float64)
    suf_idx_arr = np.empty(m, dtype=np.int64)
    cdef double[::1] v_row = v_row_arr
    cdef double[::1] prefix = prefix_arr
    cdef double[::1] suf_val = suf_val_arr
    cdef long long[::1] suf_idx = suf_idx_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n_calls):
            _scan_one_call(
                n_h, m, fast, n_groups,
                iv_bounds, iv_gidx, set_indptr, set_indices, set_gidx,
                v_row, prefix, suf_val, suf_idx,
                base, label_val, corr, i,
                &out_g[i], &out_h[i], &out_val[i],
            )
    return out_g_arr, out_h_arr, out_val_arr
