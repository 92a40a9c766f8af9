"""Loop kernels compiled with numba; same signatures as ``_numpy``."""
import numpy as np
from numba import njit


@njit(cache=True)
def _mk_s(x):
    n = x.shape[0]
    s = 0
    for k in range(n - 1):
        xk = x[k]
        for t in range(k + 1, n):
            d = x[t] - xk
            if d > 0:
                s += 1
            elif d < 0:
                s -= 1
    return s


def mk_s(x):
    return int(_mk_s(np.ascontiguousarray(x, dtype=np.float64)))


@njit(cache=True)
def _tie_group_sizes(x):
    xs = np.sort(x)
    n = xs.shape[0]
    out = np.empty(n, dtype=np.int64)
    g = 0
    i = 0
    while i < n:
        j = i + 1
        while j < n and xs[j] == xs[i]:
            j += 1
        out[g] = j - i
        g += 1
        i = j
    return out[:g]


def tie_group_sizes(x):
    return _tie_group_sizes(np.ascontiguousarray(x, dtype=np.float64))


@njit(cache=True)
def _average_ranks(x):
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i + 1
        while j < n and x[order[j]] == x[order[i]]:
            j += 1
        r = (i + j + 1) / 2.0
        for t in range(i, j):
            ranks[order[t]] = r
        i = j
    return ranks


def average_ranks(x):
    return _average_ranks(np.ascontiguousarray(x, dtype=np.float64))


@njit(cache=True)
def _pearson(a, b):
    n = a.shape[0]
    ma = 0.0
    mb = 0.0
    for i in range(n):
        ma += a[i]
        mb += b[i]
    ma /= n
    mb /= n
    sab = 0.0
    saa = 0.0
    sbb = 0.0
    for i in range(n):
        da = a[i] - ma
        db = b[i] - mb
        sab += da * db
        saa += da * da
        sbb += db * db
    denom = np.sqrt(saa * sbb)
    if denom == 0.0:
        return np.nan
    return sab / denom


def pearson(a, b):
    return float(_pearson(np.ascontiguousarray(a, dtype=np.float64),
                          np.ascontiguousarray(b, dtype=np.float64)))


@njit(cache=True)
def _cumulative_mco(positive):
    n = positive.shape[0]
    pos = np.empty(n, dtype=np.float64)
    neg = np.empty(n, dtype=np.float64)
    mco = np.empty(n, dtype=np.float64)
    n_pos = 0
    for i in range(n):
        if positive[i]:
            n_pos += 1
        k = i + 1
        pos[i] = n_pos / k
        neg[i] = (k - n_pos) / k
        mco[i] = pos[i] if pos[i] >= neg[i] else neg[i]
    return pos, neg, mco


def cumulative_mco(positive):
    return _cumulative_mco(np.ascontiguousarray(positive, dtype=np.int64))


@njit(cache=True)
def _excess_kurtosis(x):
    n = x.shape[0]
    mu = 0.0
    for i in range(n):
        mu += x[i]
    mu /= n
    m2 = 0.0
    for i in range(n):
        d = x[i] - mu
        m2 += d * d
    m2 /= n
    if m2 == 0.0:
        return np.nan
    sd = np.sqrt(m2)
    m4 = 0.0
    for i in range(n):
        z = (x[i] - mu) / sd
        m4 += z * z * z * z
    return m4 / n - 3.0


def excess_kurtosis(x):
    return float(_excess_kurtosis(np.ascontiguousarray(x, dtype=np.float64)))


@njit(cache=True)
def _quantile_linear(x, q):
    xs = np.sort(x)
    pos = q * (xs.shape[0] - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, xs.shape[0] - 1)
    frac = pos - lo
    return xs[lo] + (xs[hi] - xs[lo]) * frac


def quantile_linear(x, q):
    return float(_quantile_linear(np.ascontiguousarray(x, dtype=np.float64), float(q)))


@njit(cache=True)
def _prefix_means(x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    s = 0.0
    for i in range(n):
        s += x[i]
        out[i] = s / (i + 1)
    return out


def prefix_means(x):
    return _prefix_means(np.ascontiguousarray(x, dtype=np.float64))
