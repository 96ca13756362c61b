"""Compiled inner loops for the per-frame hot path.

All kernels are single-threaded and accumulate in a fixed order, so results
are bitwise reproducible.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _reflect(i, n):
    # symmetric extension: d c b a | a b c d | d c b a
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - i - 1
    return i


@njit(cache=True)
def smooth_moments(v, w):
    """Separable correlation of v and v*v with the 1-D window w."""
    h, wd = v.shape
    k = w.shape[0]
    r = k // 2
    hv = np.empty((h, wd))
    hv2 = np.empty((h, wd))
    for i in range(h):
        for j in range(wd):
            s = 0.0
            s2 = 0.0
            if j >= r and j < wd - r:
                for t in range(k):
                    x = v[i, j - r + t]
                    s += w[t] * x
                    s2 += w[t] * x * x
            else:
                for t in range(k):
                    x = v[i, _reflect(j - r + t, wd)]
                    s += w[t] * x
                    s2 += w[t] * x * x
            hv[i, j] = s
            hv2[i, j] = s2
    mu = np.empty((h, wd))
    m2 = np.empty((h, wd))
    for i in range(h):
        for j in range(wd):
            mu[i, j] = 0.0
            m2[i, j] = 0.0
        for t in range(k):
            ii = _reflect(i - r + t, h)
            wt = w[t]
            for j in range(wd):
                mu[i, j] += wt * hv[ii, j]
                m2[i, j] += wt * hv2[ii, j]
    return mu, m2


@njit(cache=True)
def smooth(v, w):
    h, wd = v.shape
    k = w.shape[0]
    r = k // 2
    hv = np.empty((h, wd))
    for i in range(h):
        for j in range(wd):
            s = 0.0
            if j >= r and j < wd - r:
                for t in range(k):
                    s += w[t] * v[i, j - r + t]
            else:
                for t in range(k):
                    s += w[t] * v[i, _reflect(j - r + t, wd)]
            hv[i, j] = s
    out = np.zeros((h, wd))
    for i in range(h):
        for t in range(k):
            ii = _reflect(i - r + t, h)
            wt = w[t]
            for j in range(wd):
                out[i, j] += wt * hv[ii, j]
    return out


@njit(cache=True)
def mscn_from_moments(v, mu, m2, c):
    h, wd = v.shape
    out = np.empty((h, wd))
    for i in range(h):
        for j in range(wd):
            var = m2[i, j] - mu[i, j] * mu[i, j]
            if var < 0.0:
                var = -var
            out[i, j] = (v[i, j] - mu[i, j]) / (np.sqrt(var) + c)
    return out


@njit(cache=True, inline="always")
def _acc(p, row):
    if p < 0.0:
        row[0] += 1.0
        row[1] += p * p
        row[4] -= p
    else:
        row[2] += 1.0
        row[3] += p * p
        row[4] += p


@njit(cache=True)
def nss_moments(f):
    """Moments for the GGD fit of f and AGGD fits of its 4 neighbour products.

    Row 0: [n, sum|x|, sum x^2, 0, 0].
    Rows 1-4 (H, V, main diag, anti diag): [n_neg, sumsq_neg, n_pos, sumsq_pos, sum|p|].
    """
    h, wd = f.shape
    out = np.zeros((5, 5))
    row = np.zeros((5, 5))
    for i in range(h):
        row[:, :] = 0.0
        last = i == h - 1
        for j in range(wd):
            x = f[i, j]
            row[0, 1] += abs(x)
            row[0, 2] += x * x
            if j < wd - 1:
                _acc(x * f[i, j + 1], row[1])
            if not last:
                _acc(x * f[i + 1, j], row[2])
                if j < wd - 1:
                    _acc(x * f[i + 1, j + 1], row[3])
                    _acc(f[i, j + 1] * f[i + 1, j], row[4])
        out += row
    out[0, 0] = h * wd
    return out


@njit(cache=True)
def _minmax_rows(v, w):
    # van Herk / Gil-Werman running min and max along axis 1, symmetric borders
    h, n = v.shape
    r = w // 2
    m = n + 2 * r
    nb = (m + w - 1) // w
    L = nb * w
    lo = np.empty((h, n))
    hi = np.empty((h, n))
    p = np.empty(L)
    gmin = np.empty(L)
    gmax = np.empty(L)
    smin = np.empty(L)
    smax = np.empty(L)
    for i in range(h):
        for k in range(L):
            kk = k - r
            if kk >= n + r:
                p[k] = p[m - 1]
            else:
                p[k] = v[i, _reflect(kk, n)]
        for b in range(0, L, w):
            gmin[b] = p[b]
            gmax[b] = p[b]
            for k in range(b + 1, b + w):
                x = p[k]
                gmin[k] = x if x < gmin[k - 1] else gmin[k - 1]
                gmax[k] = x if x > gmax[k - 1] else gmax[k - 1]
            e = b + w - 1
            smin[e] = p[e]
            smax[e] = p[e]
            for k in range(e - 1, b - 1, -1):
                x = p[k]
                smin[k] = x if x < smin[k + 1] else smin[k + 1]
                smax[k] = x if x > smax[k + 1] else smax[k + 1]
        for j in range(n):
            a = smin[j]
            b2 = gmin[j + w - 1]
            lo[i, j] = a if a < b2 else b2
            a = smax[j]
            b2 = gmax[j + w - 1]
            hi[i, j] = a if a > b2 else b2
    return lo, hi


@njit(cache=True)
def _minmax_cols(src, w, take_max):
    # same along axis 0, vectorized across each row for contiguous access
    n, wd = src.shape
    r = w // 2
    m = n + 2 * r
    nb = (m + w - 1) // w
    L = nb * w
    g = np.empty((L, wd))
    s = np.empty((L, wd))
    for b in range(0, L, w):
        for k in range(b, b + w):
            ik = _reflect(min(k, m - 1) - r, n)
            for j in range(wd):
                x = src[ik, j]
                if k == b:
                    g[k, j] = x
                else:
                    y = g[k - 1, j]
                    g[k, j] = (x if x > y else y) if take_max else (x if x < y else y)
        e = b + w - 1
        for k in range(e, b - 1, -1):
            ik = _reflect(min(k, m - 1) - r, n)
            for j in range(wd):
                x = src[ik, j]
                if k == e:
                    s[k, j] = x
                else:
                    y = s[k + 1, j]
                    s[k, j] = (x if x > y else y) if take_max else (x if x < y else y)
    out = np.empty((n, wd))
    for i in range(n):
        for j in range(wd):
            a = s[i, j]
            b2 = g[i + w - 1, j]
            out[i, j] = (a if a > b2 else b2) if take_max else (a if a < b2 else b2)
    return out


@njit(cache=True)
def window_minmax(v, w):
    """W x W running min and max with symmetric borders, O(1) per pixel in W."""
    lo_r, hi_r = _minmax_rows(v, w)
    return _minmax_cols(lo_r, w, False), _minmax_cols(hi_r, w, True)
