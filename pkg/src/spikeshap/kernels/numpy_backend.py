"""Pure-numpy fallbacks for the compiled kernels.

Same signatures and, operation for operation, the same floating-point
arithmetic as ``numba_backend``: sorts are stable, running sums are replayed
with cumsum (a sequential accumulation, so every prefix and total carries the
same rounding as the compiled scalar loops), and products are grouped the
same way. Both backends therefore return bit-identical results and backend
choice never changes a model, an attribution, or a report.
"""

import numpy as np


def tree_predict(children_left, children_right, feature, threshold, leaf_value, X):
    n = X.shape[0]
    rows = np.arange(n)
    node = np.zeros(n, dtype=np.int64)
    while True:
        f = feature[node]
        m = f >= 0
        if not m.any():
            break
        r = rows[m]
        nd = node[m]
        left = X[r, f[m]] <= threshold[nd]
        node[m] = np.where(left, children_left[nd], children_right[nd])
    return leaf_value[node].astype(np.float64)


def best_split(X, y, w, min_leaf):
    n, f = X.shape
    if n < 2:
        return -1, 0.0, 0.0
    # Adding 0.0 is exact, so cumsum over masked weights replays the compiled
    # kernel's "add w[i] only when y[i] == 1" running sum bit for bit.
    w1 = np.where(y == 1, w, 0.0)
    w_tot = float(np.cumsum(w)[-1])
    w1_tot = float(np.cumsum(w1)[-1])
    w0_tot = w_tot - w1_tot
    p0 = w0_tot / w_tot
    p1 = w1_tot / w_tot
    imp_parent = 1.0 - p0 * p0 - p1 * p1

    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    left_n = np.arange(1, n)
    size_ok = (left_n >= min_leaf) & (n - left_n >= min_leaf)
    for j in range(f):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        wl = np.cumsum(w[order])[:-1]
        wl1 = np.cumsum(w1[order])[:-1]
        valid = size_ok & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        wr = w_tot - wl
        wr1 = w1_tot - wl1
        wl0 = wl - wl1
        wr0 = wr - wr1
        with np.errstate(invalid="ignore", divide="ignore"):
            pl0 = wl0 / wl
            pl1 = wl1 / wl
            pr0 = wr0 / wr
            pr1 = wr1 / wr
            imp_l = 1.0 - pl0 * pl0 - pl1 * pl1
            imp_r = 1.0 - pr0 * pr0 - pr1 * pr1
            gain = imp_parent - (wl / w_tot) * imp_l - (wr / w_tot) * imp_r
        gain = np.where(valid, gain, -np.inf)
        # First occurrence of the maximum keeps the lowest threshold, the
        # same outcome as the compiled kernel's strict > in ascending scan.
        pos = int(np.argmax(gain))
        g = float(gain[pos])
        if g > best_gain:
            best_gain = g
            best_feat = j
            best_thr = 0.5 * (float(xs[pos]) + float(xs[pos + 1]))
    return best_feat, best_thr, best_gain


def tree_phi(leaf_off, ffeat, fr, flo, fhi, leaf_val, wtab, X, phi):
    n_leaves = leaf_val.shape[0]
    powers = None
    for l in range(n_leaves):
        s0 = int(leaf_off[l])
        s1 = int(leaf_off[l + 1])
        d = s1 - s0
        if d == 0:
            continue
        feats = ffeat[s0:s1]
        r = fr[s0:s1]
        xv = X[:, feats]
        amat = (xv > flo[s0:s1]) & (xv <= fhi[s0:s1])
        if powers is None or powers.shape[0] < d:
            powers = 1 << np.arange(max(d, 16), dtype=np.int64)
        codes = amat @ powers[:d]
        val = float(leaf_val[l])
        for code in np.unique(codes):
            rows = np.nonzero(codes == code)[0]
            a = [(int(code) >> t) & 1 for t in range(d)]
            # Same sequential scalar arithmetic as the compiled kernel so
            # contributions match bitwise.
            p = [0.0] * (d + 1)
            p[0] = 1.0
            deg = 0
            for t in range(d):
                rt = float(r[t])
                at = float(a[t])
                prev = 0.0
                for k in range(deg + 1):
                    cur = p[k]
                    p[k] = rt * cur + at * prev
                    prev = cur
                p[deg + 1] = at * prev
                deg += 1
            contrib = np.empty(d, np.float64)
            quot = [0.0] * d
            for t in range(d):
                rt = float(r[t])
                at = float(a[t])
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
                contrib[t] = val * (at - rt) * s
            phi[np.ix_(rows, feats)] += contrib[None, :]


def assign_points(X, C):
    n = X.shape[0]
    k = C.shape[0]
    d2 = np.empty((n, k), np.float64)
    for c in range(k):
        diff = X - C[c]
        # cumsum walks the coordinates in the same order as the compiled
        # kernel's inner loop, so each squared distance rounds identically.
        d2[:, c] = np.cumsum(diff * diff, axis=1)[:, -1]
    assign = np.argmin(d2, axis=1).astype(np.int64)
    if n == 0:
        return assign, 0.0
    inertia = float(np.cumsum(d2[np.arange(n), assign])[-1])
    return assign, inertia
