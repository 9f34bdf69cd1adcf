# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def window_lag_corr(x, y, starts, Py_ssize_t width, lags):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long long[::1] sv = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const long long[::1] lv = np.ascontiguousarray(lags, dtype=np.int64)
    cdef Py_ssize_t nw = sv.shape[0], nl = lv.shape[0]
    out = np.full((nw, nl), np.nan)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k, t, u
    cdef double mx, my, sxx, syy, sxy, dx, dy, xmin, xmax, ymin, ymax, r
    for i in range(nw):
        t = sv[i]
        mx = 0.0
        xmin = xv[t]
        xmax = xv[t]
        for k in range(width):
            mx += xv[t + k]
            if xv[t + k] < xmin:
                xmin = xv[t + k]
            if xv[t + k] > xmax:
                xmax = xv[t + k]
        if xmin == xmax:
            continue
        mx = mx / width
        sxx = 0.0
        for k in range(width):
            dx = xv[t + k] - mx
            sxx += dx * dx
        for j in range(nl):
            u = t - lv[j]
            my = 0.0
            ymin = yv[u]
            ymax = yv[u]
            for k in range(width):
                my += yv[u + k]
                if yv[u + k] < ymin:
                    ymin = yv[u + k]
                if yv[u + k] > ymax:
                    ymax = yv[u + k]
            if ymin == ymax:
                continue
            my = my / width
            syy = 0.0
            sxy = 0.0
            for k in range(width):
                dx = xv[t + k] - mx
                dy = yv[u + k] - my
                syy += dy * dy
                sxy += dx * dy
            r = sxy / sqrt(sxx * syy)
            if r > 1.0:
                r = 1.0
            elif r < -1.0:
                r = -1.0
            ov[i, j] = r
    return out


def moving_average(x, Py_ssize_t width):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    cdef const double[:, ::1] xv = arr
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1]
    cdef Py_ssize_t left = (width - 1) // 2, right = width // 2
    out = np.empty((n, m))
    cdef double[:, ::1] ov = out
    # row-major running sums keep memory access contiguous
    cs_arr = np.zeros((n + 1, m))
    cdef double[:, ::1] cs = cs_arr
    cdef Py_ssize_t i, c, lo, hi
    cdef double inv
    for i in range(n):
        for c in range(m):
            cs[i + 1, c] = cs[i, c] + xv[i, c]
    for i in range(n):
        lo = i - left
        if lo < 0:
            lo = 0
        hi = i + right + 1
        if hi > n:
            hi = n
        inv = 1.0 / (hi - lo)
        for c in range(m):
            ov[i, c] = (cs[hi, c] - cs[lo, c]) * inv
    return out[:, 0] if squeeze else out


def find_peaks(x, double threshold, Py_ssize_t min_separation):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    if n < 3:
        return np.empty(0, dtype=np.int64)
    cand_list = []
    cdef Py_ssize_t i
    for i in range(1, n - 1):
        if xv[i] > xv[i - 1] and xv[i] > xv[i + 1] and xv[i] >= threshold:
            cand_list.append(i)
    cand_arr = np.asarray(cand_list, dtype=np.int64)
    cdef Py_ssize_t nc = cand_arr.shape[0]
    if min_separation <= 1 or nc < 2:
        return cand_arr
    cdef const long long[::1] cand = cand_arr
    amps = np.asarray(x, dtype=np.float64)[cand_arr]
    order_arr = np.argsort(-amps, kind="stable").astype(np.int64)
    cdef const long long[::1] order = order_arr
    keep_arr = np.ones(nc, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    cdef Py_ssize_t q, k, j
    for q in range(nc):
        k = order[q]
        if not keep[k]:
            continue
        j = k - 1
        while j >= 0 and cand[k] - cand[j] < min_separation:
            keep[j] = 0
            j -= 1
        j = k + 1
        while j < nc and cand[j] - cand[k] < min_separation:
            keep[j] = 0
            j += 1
    return cand_arr[keep_arr.astype(bool)]
