"""Hot numeric loops compiled with numba.

Every function here has a pure-numpy twin in ``numpy_backend`` with the same
signature and, operation for operation, the same floating-point arithmetic:
sorts are stable and reductions accumulate in the same sequence, so both
backends return bit-identical results and backend choice never changes a
model, an attribution, or a report. Keep these kernels free of Python
objects and RNG: all randomness stays in the callers.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def tree_predict(children_left, children_right, feature, threshold, leaf_value, X):
    # Route every row to a leaf; feature[node] < 0 marks a leaf.
    n = X.shape[0]
    out = np.empty(n, np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = children_left[node]
            else:
                node = children_right[node]
        out[i] = leaf_value[node]
    return out


@njit(cache=True)
def best_split(X, y, w, min_leaf):
    """Best weighted-Gini split over the columns of X.

    X holds the candidate feature columns in scan order. Returns
    (column, threshold, gain); column -1 means no split improves impurity.
    Ties keep the earliest column, then the lowest threshold, because only
    a strictly larger gain replaces the incumbent. The sort is stable and
    weights accumulate in sorted-row order so the numpy twin, which replays
    the same sequence with cumsum, lands on bit-identical gains.
    """
    n, f = X.shape
    w_tot = 0.0
    w1_tot = 0.0
    for i in range(n):
        w_tot += w[i]
        if y[i] == 1:
            w1_tot += w[i]
    w0_tot = w_tot - w1_tot
    p0 = w0_tot / w_tot
    p1 = w1_tot / w_tot
    imp_parent = 1.0 - p0 * p0 - p1 * p1

    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    for j in range(f):
        col = np.ascontiguousarray(X[:, j])
        order = np.argsort(col, kind="mergesort")
        wl = 0.0
        wl1 = 0.0
        for pos in range(n - 1):
            idx = order[pos]
            wl += w[idx]
            if y[idx] == 1:
                wl1 += w[idx]
            left_n = pos + 1
            if left_n < min_leaf or n - left_n < min_leaf:
                continue
            xa = col[order[pos]]
            xb = col[order[pos + 1]]
            if xb <= xa:
                continue
            wr = w_tot - wl
            wr1 = w1_tot - wl1
            wl0 = wl - wl1
            wr0 = wr - wr1
            pl0 = wl0 / wl
            pl1 = wl1 / wl
            pr0 = wr0 / wr
            pr1 = wr1 / wr
            imp_l = 1.0 - pl0 * pl0 - pl1 * pl1
            imp_r = 1.0 - pr0 * pr0 - pr1 * pr1
            gain = imp_parent - (wl / w_tot) * imp_l - (wr / w_tot) * imp_r
            if gain > best_gain:
                best_gain = gain
                best_feat = j
                best_thr = 0.5 * (xa + xb)
    return best_feat, best_thr, best_gain


@njit(cache=True)
def tree_phi(leaf_off, ffeat, fr, flo, fhi, leaf_val, wtab, X, phi):
    """Add one tree's exact Shapley values into phi (queries x features).

    The tree is flattened into per-leaf factor lists: for leaf l the factors
    sit in [leaf_off[l], leaf_off[l+1]). Each factor belongs to one distinct
    feature on the root-leaf path and carries the cover fraction fr (product
    of child/parent sample shares) plus the interval (flo, fhi] the query
    must fall in to route there. For a query, factor t contributes either
    its indicator a_t or fr_t; the leaf's weight under a feature subset S is
    prod(a_t if t in S else fr_t). The Shapley value of that product game is
    computed by building the polynomial prod_t(fr_t + a_t z) and dividing
    out one factor at a time; wtab[d, k] = k! (d-1-k)! / d!.
    """
    q = X.shape[0]
    n_leaves = leaf_val.shape[0]
    max_d = wtab.shape[0] - 1
    p = np.empty(max_d + 1, np.float64)
    quot = np.empty(max_d + 1, np.float64)
    a = np.empty(max_d + 1, np.float64)
    for qi in range(q):
        for l in range(n_leaves):
            s0 = leaf_off[l]
            d = leaf_off[l + 1] - s0
            if d == 0:
                continue
            for t in range(d):
                xv = X[qi, ffeat[s0 + t]]
                if xv > flo[s0 + t] and xv <= fhi[s0 + t]:
                    a[t] = 1.0
                else:
                    a[t] = 0.0
            p[0] = 1.0
            deg = 0
            for t in range(d):
                rt = fr[s0 + t]
                at = a[t]
                prev = 0.0
                for k in range(deg + 1):
                    cur = p[k]
                    p[k] = rt * cur + at * prev
                    prev = cur
                p[deg + 1] = at * prev
                deg += 1
            val = leaf_val[l]
            for t in range(d):
                rt = fr[s0 + t]
                at = a[t]
                if at == 0.0:
                    for k in range(d):
                        quot[k] = p[k] / rt
                else:
                    quot[d - 1] = p[d]
                    for k in range(d - 1, 0, -1):
                        quot[k - 1] = p[k] - rt * quot[k]
                s = 0.0
                for k in range(d):
                    s += wtab[d, k] * quot[k]
                phi[qi, ffeat[s0 + t]] += val * (at - rt) * s


@njit(cache=True)
def assign_points(X, C):
    # Nearest centroid per row (ties keep the lowest index) plus total inertia.
    n, d = X.shape
    k = C.shape[0]
    assign = np.empty(n, np.int64)
    inertia = 0.0
    for i in range(n):
        best = 0
        best_d = np.inf
        for c in range(k):
            s = 0.0
            for t in range(d):
                diff = X[i, t] - C[c, t]
                s += diff * diff
            if s < best_d:
                best_d = s
                best = c
        assign[i] = best
        inertia += best_d
    return assign, inertia
