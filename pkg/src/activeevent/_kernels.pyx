# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same semantics as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, isnan

cnp.import_array()


def window_entropy(x, Py_ssize_t n):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t T = xv.shape[0]
    out_arr = np.full(T, np.nan)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, i
    cdef double s, p, h
    cdef double logn = log(<double>n)
    if T < n:
        return out_arr
    for t in range(n - 1, T):
        s = 0.0
        for i in range(t - n + 1, t + 1):
            s += xv[i]
        if s <= 0.0:
            out[t] = logn
            continue
        h = 0.0
        for i in range(t - n + 1, t + 1):
            if xv[i] > 0.0:
                p = xv[i] / s
                h -= p * log(p)
        out[t] = h
    return out_arr


cdef double _arrival_drop(const double[::1] xv, Py_ssize_t t, Py_ssize_t n, Py_ssize_t radius):
    """Largest entropy decrease when the window ending at t grows forward by
    1..radius frames without dropping old ones (so only arrivals count)."""
    cdef Py_ssize_t T = xv.shape[0], i, hi
    cdef double s = 0.0, q = 0.0, h, h0, hmin
    for i in range(t - n + 1, t + 1):
        s += xv[i]
        if xv[i] > 0.0:
            q += xv[i] * log(xv[i])
    h0 = log(<double>n) if s <= 0.0 else log(s) - q / s
    hmin = h0
    hi = t + radius + 1
    if hi > T:
        hi = T
    for i in range(t + 1, hi):
        s += xv[i]
        if xv[i] > 0.0:
            q += xv[i] * log(xv[i])
        h = log(<double>(i - t + n)) if s <= 0.0 else log(s) - q / s
        if h < hmin:
            hmin = h
    return h0 - hmin


def entropy_peaks(x, H, Py_ssize_t n, Py_ssize_t radius, double min_prom, double eps):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef Py_ssize_t T = hv.shape[0]
    cand_arr = np.empty(max(T, 1), dtype=np.int64)
    arr_arr = np.zeros(max(T, 1), dtype=np.uint8)
    trail_arr = np.zeros(max(T, 1), dtype=np.uint8)
    cdef cnp.int64_t[::1] cand = cand_arr
    cdef cnp.uint8_t[::1] arrival = arr_arr
    cdef cnp.uint8_t[::1] trailing = trail_arr
    cdef Py_ssize_t nc = 0, t, j, k, s, hi
    cdef double h, lo
    for t in range(1, T - 1):
        h = hv[t]
        if isnan(h) or isnan(hv[t - 1]) or isnan(hv[t + 1]):
            continue
        if not (h > hv[t - 1] + eps and h > hv[t + 1] + eps):
            continue
        hi = t + radius + 1
        if hi > T:
            hi = T
        lo = hv[t + 1]
        for j in range(t + 2, hi):
            if hv[j] < lo:
                lo = hv[j]
        trailing[nc] = h - lo >= min_prom - eps
        arrival[nc] = _arrival_drop(xv, t, n, radius) >= min_prom - eps
        if trailing[nc] or arrival[nc]:
            cand[nc] = t
            nc += 1
    # a trailing-only drop within radius of n frames after an arrival is its echo
    acc_arr = np.zeros(max(nc, 1), dtype=np.uint8)
    cdef cnp.uint8_t[::1] accepted = acc_arr
    cdef bint echo
    for j in range(nc):
        if arrival[j]:
            accepted[j] = 1
            continue
        t = cand[j]
        echo = False
        for k in range(j):
            if arrival[k] and cand[k] + n - radius <= t and t <= cand[k] + n + radius:
                echo = True
                break
        accepted[j] = not echo
    keep_arr = np.empty(nc, dtype=np.int64)
    cdef cnp.int64_t[::1] keep = keep_arr
    cdef Py_ssize_t nk = 0
    cdef bint ok
    for j in range(nc):
        if not accepted[j]:
            continue
        t = cand[j]
        ok = True
        for k in range(nc):
            s = cand[k]
            if not accepted[k] or s == t or s - t > radius or t - s > radius:
                continue
            if hv[s] > hv[t] + eps or (fabs(hv[s] - hv[t]) <= eps and s < t):
                ok = False
                break
        if ok:
            keep[nk] = t
            nk += 1
    return keep_arr[:nk].copy()


def greedy_match_count(pred, gt, long tol):
    cdef const cnp.int64_t[::1] pv = np.ascontiguousarray(pred, dtype=np.int64)
    cdef const cnp.int64_t[::1] gv = np.ascontiguousarray(gt, dtype=np.int64)
    cdef Py_ssize_t P = pv.shape[0], G = gv.shape[0]
    if P == 0 or G == 0:
        return 0
    cdef Py_ssize_t g, p, start, m = 0, k
    cdef long d
    # both inputs are sorted: each gt only scans the preds inside its window
    start = 0
    for g in range(G):
        while start < P and pv[start] < gv[g] - tol:
            start += 1
        p = start
        while p < P and pv[p] <= gv[g] + tol:
            m += 1
            p += 1
    keys_arr = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] keys = keys_arr
    m = 0
    start = 0
    for g in range(G):
        while start < P and pv[start] < gv[g] - tol:
            start += 1
        p = start
        while p < P and pv[p] <= gv[g] + tol:
            d = pv[p] - gv[g]
            if d < 0:
                d = -d
            keys[m] = (d * G + g) * P + p
            m += 1
            p += 1
    cdef cnp.int64_t[::1] order = np.sort(keys_arr)
    cdef cnp.uint8_t[::1] used_g = np.zeros(G, dtype=np.uint8)
    cdef cnp.uint8_t[::1] used_p = np.zeros(P, dtype=np.uint8)
    cdef long tp = 0
    cdef cnp.int64_t key
    for k in range(m):
        key = order[k]
        p = key % P
        g = (key // P) % G
        if not used_g[g] and not used_p[p]:
            used_g[g] = 1
            used_p[p] = 1
            tp += 1
    return tp


def segment_argmin(values, starts, ends):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.int64_t[::1] sv = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const cnp.int64_t[::1] ev = np.ascontiguousarray(ends, dtype=np.int64)
    cdef Py_ssize_t n = sv.shape[0], k, i, best
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    for k in range(n):
        best = sv[k]
        for i in range(sv[k] + 1, ev[k]):
            if v[i] < v[best]:
                best = i
        out[k] = best
    return out_arr
