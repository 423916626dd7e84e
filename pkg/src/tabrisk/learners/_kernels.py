"""Compiled split-search kernels.

Statistics arrive as two per-row columns (s0, s1): (w, w*y) for Gini and
(g, h) for Newton trees. Scores are maximized; a later candidate replaces
the incumbent only when it wins by more than ``rtol * (|best| + 1)``.
"""

import numpy as np
from numba import njit

GINI = 0
NEWTON = 1


@njit(cache=True, inline="always")
def _side(a, b, crit, lam):
    if crit == GINI:
        if a <= 0.0:
            return -np.inf
        return (b * b + (a - b) * (a - b)) / a
    d = b + lam
    if d <= 0.0:
        return -np.inf
    return a * a / d


@njit(cache=True)
def random_split(X, s0, s1, rows, feats, u, crit, lam, rtol):
    """One threshold lo + u[p] * (hi - lo) per candidate feature p."""
    n = rows.size
    best_pos = -1
    best_thr = 0.0
    best_score = -np.inf
    t0 = 0.0
    t1 = 0.0
    for i in range(n):
        t0 += s0[rows[i]]
        t1 += s1[rows[i]]
    for p in range(feats.size):
        j = feats[p]
        lo = np.inf
        hi = -np.inf
        for i in range(n):
            v = X[rows[i], j]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        if not lo < hi:
            continue
        thr = lo + (hi - lo) * u[p]
        if not thr < hi:
            thr = lo
        l0 = 0.0
        l1 = 0.0
        for i in range(n):
            r = rows[i]
            if X[r, j] <= thr:
                l0 += s0[r]
                l1 += s1[r]
        sc = _side(l0, l1, crit, lam) + _side(t0 - l0, t1 - l1, crit, lam)
        if sc == -np.inf:
            continue
        if best_pos < 0 or sc > best_score + rtol * (abs(best_score) + 1.0):
            best_pos = p
            best_thr = thr
            best_score = sc
    return best_pos, best_thr, best_score


@njit(cache=True)
def partition(X, rows, j, thr):
    """Split ``rows`` by X[:, j] <= thr, preserving order within each side."""
    n = rows.size
    left = np.empty(n, dtype=np.int64)
    right = np.empty(n, dtype=np.int64)
    nl = 0
    nr = 0
    for i in range(n):
        r = rows[i]
        if X[r, j] <= thr:
            left[nl] = r
            nl += 1
        else:
            right[nr] = r
            nr += 1
    return left[:nl], right[:nr]


@njit(cache=True)
def node_summary(s0, s1, y, rows):
    """Column sums of the statistics and the count of positive labels."""
    t0 = 0.0
    t1 = 0.0
    n1 = 0
    for i in range(rows.size):
        r = rows[i]
        t0 += s0[r]
        t1 += s1[r]
        if y[r] > 0.5:
            n1 += 1
    return t0, t1, n1


@njit(cache=True)
def presort(X, rows):
    """(f, n) row ids of ``rows`` ordered by each feature (stable)."""
    f = X.shape[1]
    n = rows.size
    out = np.empty((f, n), dtype=np.int64)
    vals = np.empty(n)
    for j in range(f):
        for i in range(n):
            vals[i] = X[rows[i], j]
        order = np.argsort(vals, kind="mergesort")
        for i in range(n):
            out[j, i] = rows[order[i]]
    return out


@njit(cache=True)
def exact_split_sorted(X, s0, s1, srows, feats, crit, lam, rtol):
    """Best cut over midpoints of consecutive distinct values.

    ``srows[j]`` lists the node's rows ordered by feature j (see ``presort``).
    Within a feature the lowest qualifying threshold wins.
    """
    n = srows.shape[1]
    best_pos = -1
    best_thr = 0.0
    best_score = -np.inf
    if n < 2:
        return best_pos, best_thr, best_score
    scores = np.empty(n - 1)
    for p in range(feats.size):
        j = feats[p]
        order = srows[j]
        t0 = 0.0
        t1 = 0.0
        for i in range(n):
            t0 += s0[order[i]]
            t1 += s1[order[i]]
        l0 = 0.0
        l1 = 0.0
        top = -np.inf
        for i in range(n - 1):
            r = order[i]
            l0 += s0[r]
            l1 += s1[r]
            if X[r, j] < X[order[i + 1], j]:
                sc = _side(l0, l1, crit, lam) + _side(t0 - l0, t1 - l1, crit, lam)
            else:
                sc = -np.inf
            scores[i] = sc
            if sc > top:
                top = sc
        if top == -np.inf:
            continue
        tol = rtol * (abs(top) + 1.0)
        if best_pos >= 0 and top <= best_score + tol:
            continue
        for i in range(n - 1):
            if scores[i] >= top - tol:
                lo = X[order[i], j]
                hi = X[order[i + 1], j]
                thr = 0.5 * (lo + hi)
                if not (lo <= thr and thr < hi):
                    thr = lo
                best_pos = p
                best_thr = thr
                best_score = top
                break
    return best_pos, best_thr, best_score


@njit(cache=True)
def partition_sorted(X, srows, j, thr, flag):
    """Stable-filter every per-feature ordering into left/right children.

    ``flag`` is scratch space indexed by global row id.
    """
    f, n = srows.shape
    nl = 0
    for i in range(n):
        r = srows[0, i]
        go = X[r, j] <= thr
        flag[r] = go
        if go:
            nl += 1
    left = np.empty((f, nl), dtype=np.int64)
    right = np.empty((f, n - nl), dtype=np.int64)
    for k in range(f):
        a = 0
        b = 0
        for i in range(n):
            r = srows[k, i]
            if flag[r]:
                left[k, a] = r
                a += 1
            else:
                right[k, b] = r
                b += 1
    return left, right
