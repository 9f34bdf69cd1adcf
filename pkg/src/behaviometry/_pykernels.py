"""Pure numpy implementations of the hot kernels.

These define the reference semantics; the compiled module in
``_ckernels.pyx`` must agree with them to rounding.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def window_lag_corr(x, y, starts, width, lags):
    """Pearson correlation of ``x[t:t+width]`` with ``y[t-l:t-l+width]``.

    Returns an array of shape ``(len(starts), len(lags))``; entries where
    either segment is constant are NaN. Callers guarantee every segment
    lies inside the arrays.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    lags = np.asarray(lags, dtype=np.int64)
    out = np.full((len(starts), len(lags)), np.nan)
    if len(starts) == 0 or len(lags) == 0:
        return out

    xw = sliding_window_view(x, width)[starts]                     # (W, w)
    yw_all = sliding_window_view(y, width)
    yw = yw_all[starts[:, None] - lags[None, :]]                    # (W, L, w)

    xc = xw - xw.sum(axis=1, keepdims=True) / width
    yc = yw - yw.sum(axis=2, keepdims=True) / width
    sxx = np.einsum("ij,ij->i", xc, xc)
    syy = np.einsum("ijk,ijk->ij", yc, yc)
    sxy = np.einsum("ik,ijk->ij", xc, yc)

    x_const = xw.max(axis=1) == xw.min(axis=1)
    y_const = yw.max(axis=2) == yw.min(axis=2)
    valid = ~(x_const[:, None] | y_const)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sxy / np.sqrt(sxx[:, None] * syy)
    out[valid] = np.clip(r[valid], -1.0, 1.0)
    return out


def moving_average(x, width):
    """Centered moving average along axis 0, window shrinking at the edges.

    Frame ``i`` averages ``x[i - (width-1)//2 : i + width//2 + 1]`` clipped
    to the array bounds.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = x.shape[0]
    left = (width - 1) // 2
    right = width // 2
    cs = np.zeros((n + 1, x.shape[1]))
    np.cumsum(x, axis=0, out=cs[1:])
    i = np.arange(n)
    lo = np.maximum(i - left, 0)
    hi = np.minimum(i + right + 1, n)
    out = (cs[hi] - cs[lo]) / (hi - lo)[:, None]
    return out[:, 0] if squeeze else out


def find_peaks(x, threshold, min_separation):
    """Strict local maxima ``>= threshold`` at least ``min_separation`` apart.

    Candidates are accepted greedily from the highest amplitude down (ties
    by lower index); a candidate closer than ``min_separation`` frames to an
    accepted one is dropped. Returns sorted frame indices.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if len(x) < 3:
        return np.empty(0, dtype=np.int64)
    mid = x[1:-1]
    cand = np.flatnonzero((mid > x[:-2]) & (mid > x[2:]) & (mid >= threshold)) + 1
    if min_separation <= 1 or len(cand) < 2:
        return cand.astype(np.int64)
    order = np.argsort(-x[cand], kind="stable")
    keep = np.ones(len(cand), dtype=bool)
    for k in order:
        if not keep[k]:
            continue
        j = k - 1
        while j >= 0 and cand[k] - cand[j] < min_separation:
            keep[j] = False
            j -= 1
        j = k + 1
        while j < len(cand) and cand[j] - cand[k] < min_separation:
            keep[j] = False
            j += 1
    return cand[keep].astype(np.int64)
