"""Pure-Python/numpy implementations of the hot numeric kernels.

This module is the reference semantics for neckstrain._kernels (the compiled
twin). Both backends must produce bit-identical float64 results, so every
floating-point operation here is written with an explicit evaluation order
that the C code mirrors:

* running sums are strict left-to-right accumulations (np.cumsum and plain
  C loops agree exactly),
* split scores are evaluated as ``sl*sl/nl + sr*sr/nr``,
* the biquad recurrence is the transposed direct-form II update.

Keep the two files in lockstep; tests/test_backends.py asserts parity.
"""
from __future__ import annotations

import numpy as np

NO_FEATURE = -1


def biquad_cascade(b: np.ndarray, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Run x through a cascade of biquad sections with zero initial state.

    b: (k, 3) numerator coefficients per section, a: (k, 2) giving (a1, a2).
    """
    out = [float(v) for v in x]
    n = len(out)
    for s in range(b.shape[0]):
        b0 = float(b[s, 0])
        b1 = float(b[s, 1])
        b2 = float(b[s, 2])
        a1 = float(a[s, 0])
        a2 = float(a[s, 1])
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            xi = out[i]
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            out[i] = yi
    return np.asarray(out, dtype=np.float64)


def _scan_splits(vs: np.ndarray, ys: np.ndarray, min_leaf: int):
    """Best split of one feature column already sorted ascending.

    Returns (total_sum, best_score, best_threshold). Score is
    sl^2/nl + sr^2/nr, to be maximized; -inf when no valid position exists.
    Candidate positions sit between distinct consecutive values with at least
    min_leaf samples on each side; first occurrence wins score ties, which
    means the lowest threshold.
    """
    m = vs.shape[0]
    cs = np.cumsum(ys)
    total = float(cs[-1])
    if m < 2:
        return total, -np.inf, 0.0
    nl = np.arange(1, m, dtype=np.float64)
    nr = np.float64(m) - nl
    sl = cs[: m - 1]
    sr = total - sl
    score = sl * sl / nl + sr * sr / nr
    valid = (vs[: m - 1] != vs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return total, -np.inf, 0.0
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    thr = 0.5 * (float(vs[i]) + float(vs[i + 1]))
    if not thr < float(vs[i + 1]):
        # midpoint rounded up to the right value; fall back so `<= thr`
        # keeps exactly the scanned left side
        thr = float(vs[i])
    return total, float(score[i]), thr


def grow_tree(X: np.ndarray, y: np.ndarray, sidx: np.ndarray,
              max_depth: int, min_leaf: int):
    """Grow a variance-reduction regression tree (CART).

    X: (n, n_features) float64, y: (n,) float64, sidx: (n_features, n) int64
    with each row holding sample indices presorted by that feature (stable).
    Nodes are emitted in preorder (left subtree first). Returns a tuple of
    arrays (feature, threshold, left, right, value, n_node, gain); leaves
    carry feature == -1. gain is the absolute SSE decrease of the split.
    """
    n_features = sidx.shape[0]
    ws = np.array(sidx, dtype=np.int64, copy=True)

    feat: list[int] = []
    thr_out: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    n_node: list[int] = []
    gain_out: list[float] = []

    # stack entries: (lo, hi, depth, parent, is_left); LIFO with the right
    # child pushed first so nodes appear in left-first preorder
    stack = [(0, ws.shape[1], 0, -1, False)]
    while stack:
        lo, hi, depth, parent, is_left = stack.pop()
        node_id = len(feat)
        if parent >= 0:
            if is_left:
                left[parent] = node_id
            else:
                right[parent] = node_id
        m = hi - lo
        rows0 = ws[0, lo:hi]
        ys0 = y[rows0]

        best_f = NO_FEATURE
        best_score = -np.inf
        best_thr = 0.0
        total0 = float(np.cumsum(ys0)[-1]) if m else 0.0
        if depth < max_depth and m >= 2 * min_leaf:
            for f in range(n_features):
                rows = ws[f, lo:hi]
                total, score, thr = _scan_splits(X[rows, f], y[rows], min_leaf)
                if f == 0:
                    total0 = total
                if score > best_score:
                    best_f = f
                    best_score = score
                    best_thr = thr

        node_value = total0 / m
        if best_f >= 0:
            gain = best_score - total0 * total0 / m
        else:
            gain = 0.0

        if best_f >= 0 and gain > 0.0:
            mask0 = X[rows0, best_f] <= best_thr
            nl = int(mask0.sum())
            for f in range(n_features):
                rows = ws[f, lo:hi]
                keep = X[rows, best_f] <= best_thr
                ws[f, lo:hi] = np.concatenate([rows[keep], rows[~keep]])
            feat.append(best_f)
            thr_out.append(best_thr)
            left.append(-1)
            right.append(-1)
            value.append(node_value)
            n_node.append(m)
            gain_out.append(gain)
            stack.append((lo + nl, hi, depth + 1, node_id, False))
            stack.append((lo, lo + nl, depth + 1, node_id, True))
        else:
            feat.append(NO_FEATURE)
            thr_out.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(node_value)
            n_node.append(m)
            gain_out.append(0.0)

    return (
        np.asarray(feat, dtype=np.int32),
        np.asarray(thr_out, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        np.asarray(n_node, dtype=np.int32),
        np.asarray(gain_out, dtype=np.float64),
    )


def predict_tree(feature: np.ndarray, threshold: np.ndarray, left: np.ndarray,
                 right: np.ndarray, value: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Evaluate a grown tree on rows of X (vectorized level-by-level descent)."""
    q = X.shape[0]
    at = np.zeros(q, dtype=np.int64)
    while True:
        f = feature[at]
        internal = f >= 0
        if not internal.any():
            break
        fx = X[np.arange(q), np.where(internal, f, 0)]
        go_left = internal & (fx <= threshold[at])
        nxt = np.where(go_left, left[at], right[at])
        at = np.where(internal, nxt, at)
    return value[at].astype(np.float64, copy=False)
