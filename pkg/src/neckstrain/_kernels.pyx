# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of neckstrain._kernels_py.

Constraint: every float64 operation must match the pure-Python backend
bit-for-bit (same accumulation order, same expression shapes). Do not add
-ffast-math or reassociate arithmetic. tests/test_backends.py enforces parity.
"""
import numpy as np

cimport numpy as cnp

cdef extern from "math.h":
    double INFINITY

cnp.import_array()

NO_FEATURE = -1


def biquad_cascade(cnp.float64_t[:, ::1] b, cnp.float64_t[:, ::1] a,
                   cnp.float64_t[::1] x):
    """Run x through a cascade of biquad sections with zero initial state."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = b.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, s
    cdef double b0, b1, b2, a1, a2, s1, s2, xi, yi
    for i in range(n):
        out[i] = x[i]
    for s in range(k):
        b0 = b[s, 0]; b1 = b[s, 1]; b2 = b[s, 2]
        a1 = a[s, 0]; a2 = a[s, 1]
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            xi = out[i]
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            out[i] = yi
    return out_arr


cdef void _scan_splits(double* vs, double* ys, Py_ssize_t m,
                       Py_ssize_t min_leaf, double* out_total,
                       double* out_score, double* out_thr) noexcept nogil:
    # Mirror of _kernels_py._scan_splits: first occurrence of the maximum
    # score wins (strict > improvement only).
    cdef Py_ssize_t i, best_i
    cdef double total = 0.0
    cdef double run, sl, sr, nl, nr, score, best_score, thr
    for i in range(m):
        total += ys[i]
    out_total[0] = total
    if m < 2:
        out_score[0] = -INFINITY
        out_thr[0] = 0.0
        return
    best_score = -INFINITY
    best_i = -1
    run = 0.0
    for i in range(m - 1):
        run += ys[i]
        if vs[i] == vs[i + 1]:
            continue
        if i + 1 < min_leaf or m - i - 1 < min_leaf:
            continue
        nl = <double> (i + 1)
        nr = <double> m - nl
        sl = run
        sr = total - sl
        score = sl * sl / nl + sr * sr / nr
        if score > best_score:
            best_score = score
            best_i = i
    if best_i < 0:
        out_score[0] = -INFINITY
        out_thr[0] = 0.0
        return
    thr = 0.5 * (vs[best_i] + vs[best_i + 1])
    if not thr < vs[best_i + 1]:
        thr = vs[best_i]
    out_score[0] = best_score
    out_thr[0] = thr


def grow_tree(cnp.float64_t[:, ::1] X, cnp.float64_t[::1] y,
              cnp.int64_t[:, ::1] sidx, int max_depth, int min_leaf):
    """Grow a variance-reduction regression tree; see _kernels_py.grow_tree."""
    cdef Py_ssize_t n_features = sidx.shape[0]
    cdef Py_ssize_t n = sidx.shape[1]

    ws_arr = np.array(sidx, dtype=np.int64, copy=True)
    cdef cnp.int64_t[:, ::1] ws = ws_arr

    # every leaf holds >= max(min_leaf, 1) samples
    cdef Py_ssize_t leaf_cap = n // (min_leaf if min_leaf > 0 else 1)
    cdef Py_ssize_t cap = 2 * (leaf_cap if leaf_cap > 0 else 1) + 1
    if max_depth < 60 and (<Py_ssize_t> 1 << (max_depth + 1)) + 1 < cap:
        cap = (<Py_ssize_t> 1 << (max_depth + 1)) + 1

    feat_arr = np.empty(cap, dtype=np.int32)
    thr_arr = np.empty(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    value_arr = np.empty(cap, dtype=np.float64)
    nn_arr = np.empty(cap, dtype=np.int32)
    gain_arr = np.empty(cap, dtype=np.float64)
    cdef cnp.int32_t[::1] feat = feat_arr
    cdef cnp.float64_t[::1] thr_out = thr_arr
    cdef cnp.int32_t[::1] left = left_arr
    cdef cnp.int32_t[::1] right = right_arr
    cdef cnp.float64_t[::1] value = value_arr
    cdef cnp.int32_t[::1] nn = nn_arr
    cdef cnp.float64_t[::1] gain_out = gain_arr

    vbuf_arr = np.empty(n, dtype=np.float64)
    ybuf_arr = np.empty(n, dtype=np.float64)
    lbuf_arr = np.empty(n, dtype=np.int64)
    rbuf_arr = np.empty(n, dtype=np.int64)
    cdef cnp.float64_t[::1] vbuf = vbuf_arr
    cdef cnp.float64_t[::1] ybuf = ybuf_arr
    cdef cnp.int64_t[::1] lbuf = lbuf_arr
    cdef cnp.int64_t[::1] rbuf = rbuf_arr

    cdef Py_ssize_t stack_cap = 2 * max_depth + 8
    st_lo_arr = np.empty(stack_cap, dtype=np.int64)
    st_hi_arr = np.empty(stack_cap, dtype=np.int64)
    st_depth_arr = np.empty(stack_cap, dtype=np.int64)
    st_parent_arr = np.empty(stack_cap, dtype=np.int64)
    st_isleft_arr = np.empty(stack_cap, dtype=np.int64)
    cdef cnp.int64_t[::1] st_lo = st_lo_arr
    cdef cnp.int64_t[::1] st_hi = st_hi_arr
    cdef cnp.int64_t[::1] st_depth = st_depth_arr
    cdef cnp.int64_t[::1] st_parent = st_parent_arr
    cdef cnp.int64_t[::1] st_isleft = st_isleft_arr

    cdef Py_ssize_t sp = 0, n_nodes = 0
    cdef Py_ssize_t lo, hi, depth, parent, is_left, node_id, m, i, f, row
    cdef Py_ssize_t nl_count, nr_count, best_f
    cdef double total0, total, score, thr, best_score, best_thr
    cdef double node_value, gain, split_val

    st_lo[0] = 0; st_hi[0] = n; st_depth[0] = 0
    st_parent[0] = -1; st_isleft[0] = 0
    sp = 1

    while sp > 0:
        sp -= 1
        lo = st_lo[sp]; hi = st_hi[sp]; depth = st_depth[sp]
        parent = st_parent[sp]; is_left = st_isleft[sp]
        node_id = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = <cnp.int32_t> node_id
            else:
                right[parent] = <cnp.int32_t> node_id
        m = hi - lo

        best_f = -1
        best_score = -INFINITY
        best_thr = 0.0
        total0 = 0.0
        if depth < max_depth and m >= 2 * min_leaf:
            for f in range(n_features):
                for i in range(m):
                    row = ws[f, lo + i]
                    vbuf[i] = X[row, f]
                    ybuf[i] = y[row]
                _scan_splits(&vbuf[0], &ybuf[0], m, min_leaf,
                             &total, &score, &thr)
                if f == 0:
                    total0 = total
                if score > best_score:
                    best_f = f
                    best_score = score
                    best_thr = thr
        else:
            for i in range(m):
                total0 += y[ws[0, lo + i]]

        node_value = total0 / m
        if best_f >= 0:
            gain = best_score - total0 * total0 / m
        else:
            gain = 0.0

        if best_f >= 0 and gain > 0.0:
            nl_count = 0
            for f in range(n_features):
                nl_count = 0
                nr_count = 0
                for i in range(m):
                    row = ws[f, lo + i]
                    split_val = X[row, best_f]
                    if split_val <= best_thr:
                        lbuf[nl_count] = row
                        nl_count += 1
                    else:
                        rbuf[nr_count] = row
                        nr_count += 1
                for i in range(nl_count):
                    ws[f, lo + i] = lbuf[i]
                for i in range(nr_count):
                    ws[f, lo + nl_count + i] = rbuf[i]
            feat[node_id] = <cnp.int32_t> best_f
            thr_out[node_id] = best_thr
            value[node_id] = node_value
            nn[node_id] = <cnp.int32_t> m
            gain_out[node_id] = gain
            st_lo[sp] = lo + nl_count; st_hi[sp] = hi
            st_depth[sp] = depth + 1; st_parent[sp] = node_id; st_isleft[sp] = 0
            sp += 1
            st_lo[sp] = lo; st_hi[sp] = lo + nl_count
            st_depth[sp] = depth + 1; st_parent[sp] = node_id; st_isleft[sp] = 1
            sp += 1
        else:
            feat[node_id] = -1
            thr_out[node_id] = 0.0
            value[node_id] = node_value
            nn[node_id] = <cnp.int32_t> m
            gain_out[node_id] = 0.0

    return (
        feat_arr[:n_nodes].copy(),
        thr_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        value_arr[:n_nodes].copy(),
        nn_arr[:n_nodes].copy(),
        gain_arr[:n_nodes].copy(),
    )


def predict_tree(cnp.int32_t[::1] feature, cnp.float64_t[::1] threshold,
                 cnp.int32_t[::1] left, cnp.int32_t[::1] right,
                 cnp.float64_t[::1] value, cnp.float64_t[:, ::1] X):
    """Evaluate a grown tree on rows of X."""
    cdef Py_ssize_t q = X.shape[0]
    out_arr = np.empty(q, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t r, node
    cdef int f
    for r in range(q):
        node = 0
        f = feature[node]
        while f >= 0:
            if X[r, f] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        out[r] = value[node]
    return out_arr
