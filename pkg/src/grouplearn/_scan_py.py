"""Pure-numpy scan backend.

Contract shared with the compiled backend (``_scan.pyx``): given one score
table v[h, x] per oracle call, return the canonical argmax over
(group, hypothesis) of sum_{x in g} v[h, x]. Ties break to the smallest group
index, then the smallest hypothesis index. Every float operation is ordered
exactly like the compiled kernel (sequential prefix sums, max-accumulate
suffix scans, identical comparison rules) so the two backends are
bit-identical; parity tests enforce this.

Group structure arrives as interval bounds plus CSR set members. When the
group list is exactly all intervals in (lo, hi) lexicographic order the scan
runs the O(m)-per-hypothesis suffix-max path instead of touching every group.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _fast_interval_argmax(P: np.ndarray, m: int) -> tuple[int, int, float]:
    """Best interval-sum per the all-intervals-lex fast path.

    P is the (H, m+1) prefix table of one call. For each hypothesis the best
    interval [lo, hi] maximizes P[hi+1] - P[lo]; the suffix running max of
    P[1:] (ties to the smallest index) gives the best hi for every lo in one
    backward pass.
    """
    n_h = P.shape[0]
    s = P[:, 1:]
    rev = s[:, ::-1]
    racc = np.maximum.accumulate(rev, axis=1)
    k = np.arange(m)
    upd = np.where(rev == racc, k, -1)
    kacc = np.maximum.accumulate(upd, axis=1)
    suf_val = racc[:, ::-1]
    suf_e = (m - 1) - kacc[:, ::-1]
    cand = suf_val - P[:, :m]
    lo_star = np.argmax(cand, axis=1)
    rows = np.arange(n_h)
    vals = cand[rows, lo_star]
    hi_star = suf_e[rows, lo_star]
    g_of_h = lo_star * m - (lo_star * (lo_star - 1)) // 2 + (hi_star - lo_star)
    vmax = float(vals.max())
    ties = np.flatnonzero(vals == vmax)
    g_min = int(g_of_h[ties].min())
    h_min = int(ties[np.argmax(g_of_h[ties] == g_min)])
    return g_min, h_min, vmax


def _generic_argmax(
    v: np.ndarray,
    P: np.ndarray,
    iv_bounds: np.ndarray,
    iv_gidx: np.ndarray,
    set_indptr: np.ndarray,
    set_indices: np.ndarray,
    set_gidx: np.ndarray,
    n_groups: int,
) -> tuple[int, int, float]:
    n_h = v.shape[0]
    vals = np.empty((n_h, n_groups), dtype=np.float64)
    if len(iv_gidx):
        vals[:, iv_gidx] = P[:, iv_bounds[:, 1] + 1] - P[:, iv_bounds[:, 0]]
    for s_i, gi in enumerate(set_gidx):
        idx = set_indices[set_indptr[s_i] : set_indptr[s_i + 1]]
        # cumsum keeps the member sum sequential, matching the compiled loop.
        vals[:, gi] = np.cumsum(v[:, idx], axis=1)[:, -1]
    vmax = float(vals.max())
    flat = int(np.argmax(vals.T == vmax))  # group-major first occurrence
    return flat // n_h, flat % n_h, vmax


def _scan_stack(
    v_stack: np.ndarray,
    iv_bounds: np.ndarray,
    iv_gidx: np.ndarray,
    set_indptr: np.ndarray,
    set_indices: np.ndarray,
    set_gidx: np.ndarray,
    fast: bool,
    n_groups: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_calls, n_h, m = v_stack.shape
    prefix = np.zeros((n_calls, n_h, m + 1), dtype=np.float64)
    np.cumsum(v_stack, axis=2, out=prefix[:, :, 1:])
    out_g = np.empty(n_calls, dtype=np.int64)
    out_h = np.empty(n_calls, dtype=np.int64)
    out_val = np.empty(n_calls, dtype=np.float64)
    for i in range(n_calls):
        if fast:
            g, h, val = _fast_interval_argmax(prefix[i], m)
        else:
            g, h, val = _generic_argmax(
                v_stack[i], prefix[i], iv_bounds, iv_gidx,
                set_indptr, set_indices, set_gidx, n_groups,
            )
        out_g[i] = g
        out_h[i] = h
        out_val[i] = val
    return out_g, out_h, out_val


def scan_corr(
    base: np.ndarray,
    label_val: np.ndarray,
    corr: np.ndarray,
    iv_bounds: np.ndarray,
    iv_gidx: np.ndarray,
    set_indptr: np.ndarray,
    set_indices: np.ndarray,
    set_gidx: np.ndarray,
    fast: bool,
    n_groups: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched argmax for correlation-perturbed calls.

    Per call i the score table is v[h, x] = base[h, x] + corr[i, x] * label_val[h, x].
    """
    v_stack = base[None, :, :] + corr[:, None, :] * label_val[None, :, :]
    return _scan_stack(
        v_stack, iv_bounds, iv_gidx, set_indptr, set_indices, set_gidx, fast, n_groups
    )
