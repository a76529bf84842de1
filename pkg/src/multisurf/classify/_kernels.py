"""Inner loops for tree growing, tree traversal and Pegasos epochs.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy one.
``MULTISURF_DISABLE_JIT=1`` (or a missing numba install) selects numpy.
Both versions perform the same floating-point operations in the same order
for split search and traversal, so trees are identical across backends; the
Pegasos dot products may differ in the last ulp (BLAS vs scalar loop).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_FLAG = os.environ.get("MULTISURF_DISABLE_JIT", "").strip().lower()
USE_JIT = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


# -- split search -------------------------------------------------------------
# Score of a split is n_l*gini_l + n_r*gini_r = (n_l - sq_l/n_l) + (n_r - sq_r/n_r)
# with sq = sum of squared class counts, kept as exact integers.

def best_split_numpy(X, y, samples, features, n_classes):
    """Return ``(position in features, threshold, score)``; position -1 if no split exists."""
    n = samples.shape[0]
    best_pos, best_thr, best_score = -1, 0.0, np.inf
    if n < 2:
        return best_pos, best_thr, best_score
    ys = y[samples]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    for pos in range(features.shape[0]):
        x = X[samples, features[pos]]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), ys[order]] = 1
        left = np.cumsum(onehot, axis=0)
        total = left[-1]
        left = left[:-1]
        right = total - left
        sql = (left * left).sum(axis=1)
        sqr = (right * right).sum(axis=1)
        score = (nl - sql / nl) + (nr - sqr / nr)
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if score[i] < best_score:
            lo, hi = xs[i], xs[i + 1]
            thr = lo * 0.5 + hi * 0.5
            if not (lo <= thr < hi):
                thr = lo
            best_pos, best_thr, best_score = pos, float(thr), float(score[i])
    return best_pos, best_thr, best_score


def _best_split_loop(X, y, samples, features, n_classes):
    n = samples.shape[0]
    best_pos = -1
    best_thr = 0.0
    best_score = np.inf
    if n < 2:
        return best_pos, best_thr, best_score
    x = np.empty(n, dtype=np.float64)
    total = np.zeros(n_classes, dtype=np.int64)
    for k in range(n):
        total[y[samples[k]]] += 1
    sq_total = 0
    for c in range(n_classes):
        sq_total += total[c] * total[c]
    left = np.zeros(n_classes, dtype=np.int64)
    right = np.zeros(n_classes, dtype=np.int64)
    for pos in range(features.shape[0]):
        f = features[pos]
        for k in range(n):
            x[k] = X[samples[k], f]
        order = np.argsort(x, kind="mergesort")
        for c in range(n_classes):
            left[c] = 0
            right[c] = total[c]
        sql = 0
        sqr = sq_total
        feat_score = np.inf
        feat_i = -1
        for i in range(n - 1):
            c = y[samples[order[i]]]
            sql += 2 * left[c] + 1
            left[c] += 1
            sqr -= 2 * right[c] - 1
            right[c] -= 1
            if x[order[i]] < x[order[i + 1]]:
                nl = float(i + 1)
                nr = float(n - i - 1)
                s = (nl - sql / nl) + (nr - sqr / nr)
                if s < feat_score:
                    feat_score = s
                    feat_i = i
        if feat_i >= 0 and feat_score < best_score:
            lo = x[order[feat_i]]
            hi = x[order[feat_i + 1]]
            thr = lo * 0.5 + hi * 0.5
            if not (lo <= thr and thr < hi):
                thr = lo
            best_pos = pos
            best_thr = thr
            best_score = feat_score
    return best_pos, best_thr, best_score


# -- tree traversal -----------------------------------------------------------

def tree_apply_numpy(X, feature, threshold, left, right, value):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def _tree_apply_loop(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


# -- Pegasos ------------------------------------------------------------------

def pegasos_numpy(Z, Y, orders, lam, radius):
    """One-vs-rest Pegasos over shared visiting orders.

    ``Z`` is ``(n, p)``, ``Y`` is ``(K, n)`` in {-1, +1}, ``orders`` is
    ``(epochs, n)``. Returns the averaged iterate ``(K, p)`` and a
    ``(epochs, K, p)`` array of averaged iterates at each epoch end.
    """
    K = Y.shape[0]
    epochs, n = orders.shape
    p = Z.shape[1]
    W = np.zeros((K, p))
    Wsum = np.zeros((K, p))
    snaps = np.empty((epochs, K, p))
    t = 0
    for e in range(epochs):
        for j in range(n):
            i = orders[e, j]
            t += 1
            eta = 1.0 / (lam * t)
            z = Z[i]
            yi = Y[:, i]
            margins = yi * (W @ z)
            W *= 1.0 - eta * lam
            viol = margins < 1.0
            if viol.any():
                W[viol] += (eta * yi[viol])[:, None] * z
            norms = np.sqrt((W * W).sum(axis=1))
            big = norms > radius
            if big.any():
                W[big] *= (radius / norms[big])[:, None]
            Wsum += W
        snaps[e] = Wsum / t
    return Wsum / t, snaps


def _pegasos_loop(Z, Y, orders, lam, radius):
    K = Y.shape[0]
    epochs = orders.shape[0]
    n = orders.shape[1]
    p = Z.shape[1]
    W = np.zeros((K, p))
    Wsum = np.zeros((K, p))
    snaps = np.empty((epochs, K, p))
    t = 0
    for e in range(epochs):
        for j in range(n):
            i = orders[e, j]
            t += 1
            eta = 1.0 / (lam * t)
            shrink = 1.0 - eta * lam
            for k in range(K):
                dot = 0.0
                for q in range(p):
                    dot += W[k, q] * Z[i, q]
                margin = Y[k, i] * dot
                for q in range(p):
                    W[k, q] *= shrink
                if margin < 1.0:
                    step = eta * Y[k, i]
                    for q in range(p):
                        W[k, q] += step * Z[i, q]
                norm2 = 0.0
                for q in range(p):
                    norm2 += W[k, q] * W[k, q]
                norm = np.sqrt(norm2)
                if norm > radius:
                    scale = radius / norm
                    for q in range(p):
                        W[k, q] *= scale
                for q in range(p):
                    Wsum[k, q] += W[k, q]
        for k in range(K):
            for q in range(p):
                snaps[e, k, q] = Wsum[k, q] / t
    return Wsum / t, snaps


if HAVE_NUMBA:
    best_split_numba = njit(cache=True, nogil=True)(_best_split_loop)
    tree_apply_numba = njit(cache=True, nogil=True)(_tree_apply_loop)
    pegasos_numba = njit(cache=True, nogil=True)(_pegasos_loop)
else:  # pragma: no cover
    best_split_numba = tree_apply_numba = pegasos_numba = None

if USE_JIT:
    best_split = best_split_numba
    tree_apply = tree_apply_numba
    pegasos = pegasos_numba
else:
    best_split = best_split_numpy
    tree_apply = tree_apply_numpy
    pegasos = pegasos_numpy

BACKEND = "numba" if USE_JIT else "numpy"
