"""Pure numpy/Python implementations of the hot kernels.

Semantics must match ``_kernels.pyx`` exactly; ``kernels`` picks one at import.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def window_entropy(x, n):
    x = np.ascontiguousarray(x, dtype=np.float64)
    T = x.shape[0]
    out = np.full(T, np.nan)
    if T < n:
        return out
    w = sliding_window_view(x, n)
    s = w.sum(axis=1)
    H = np.full(w.shape[0], np.log(n))
    ok = s > 0
    p = w[ok] / s[ok, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    H[ok] = -plogp.sum(axis=1)
    out[n - 1 :] = H
    return out


def arrival_drop(x, t, n, radius):
    """Largest entropy decrease when the window ending at t grows forward by
    1..radius frames without dropping old ones (so only arrivals count)."""
    seg = x[t - n + 1 : min(x.shape[0], t + radius + 1)]
    s = np.cumsum(seg)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.cumsum(np.where(seg > 0, seg * np.log(np.where(seg > 0, seg, 1.0)), 0.0))
        h = np.where(s > 0, np.log(s) - q / s, np.log(np.arange(1, seg.size + 1, dtype=np.float64)))
    h = h[n - 1 :]
    return h[0] - h.min()


def entropy_peaks(x, H, n, radius, min_prom, eps):
    x = np.asarray(x, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    T = H.shape[0]
    cand, arrival = [], []
    for t in range(1, T - 1):
        h = H[t]
        if np.isnan(h) or np.isnan(H[t - 1]) or np.isnan(H[t + 1]):
            continue
        if not (h > H[t - 1] + eps and h > H[t + 1] + eps):
            continue
        trailing = h - H[t + 1 : min(T, t + radius + 1)].min() >= min_prom - eps
        grown = arrival_drop(x, t, n, radius) >= min_prom - eps
        if trailing or grown:
            cand.append(t)
            arrival.append(grown)
    # a trailing-only drop within radius of n frames after an arrival is its echo
    accepted = []
    for j, t in enumerate(cand):
        echo = any(arrival[k] and cand[k] + n - radius <= t <= cand[k] + n + radius for k in range(j))
        if arrival[j] or not echo:
            accepted.append(t)
    keep = []
    for t in accepted:
        ok = True
        for s in accepted:
            if s == t or abs(s - t) > radius:
                continue
            if H[s] > H[t] + eps or (abs(H[s] - H[t]) <= eps and s < t):
                ok = False
                break
        if ok:
            keep.append(t)
    return np.array(keep, dtype=np.int64)


def greedy_match_count(pred, gt, tol):
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.size == 0 or gt.size == 0:
        return 0
    d = np.abs(gt[:, None] - pred[None, :])
    gi, pi = np.nonzero(d <= tol)
    order = np.lexsort((pi, gi, d[gi, pi]))
    used_g = np.zeros(gt.size, bool)
    used_p = np.zeros(pred.size, bool)
    tp = 0
    for k in order:
        g, p = gi[k], pi[k]
        if not used_g[g] and not used_p[p]:
            used_g[g] = used_p[p] = True
            tp += 1
    return tp


def segment_argmin(values, starts, ends):
    values = np.asarray(values, dtype=np.float64)
    return np.array([s + int(np.argmin(values[s:e])) for s, e in zip(starts, ends)], dtype=np.int64)
