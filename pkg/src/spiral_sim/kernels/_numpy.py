"""Vectorised numpy versions of the metric kernels."""
import numpy as np


def mk_s(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    s = 0
    # row blocks keep the pairwise matrix bounded for long series
    step = max(1, 4_000_000 // max(n, 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        diff = x[None, :] - x[lo:hi, None]
        mask = np.arange(n)[None, :] > np.arange(lo, hi)[:, None]
        s += int(np.sign(diff[mask]).sum())
    return s


def tie_group_sizes(x):
    _, counts = np.unique(np.asarray(x, dtype=np.float64), return_counts=True)
    return counts.astype(np.int64)


def average_ranks(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], n]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        return np.nan
    return float((da * db).sum() / denom)


def cumulative_mco(positive):
    positive = np.asarray(positive, dtype=np.int64)
    k = np.arange(1, positive.shape[0] + 1, dtype=np.float64)
    n_pos = np.cumsum(positive)
    n_neg = np.arange(1, positive.shape[0] + 1) - n_pos
    pos = n_pos / k
    neg = n_neg / k
    return pos, neg, np.maximum(pos, neg)


def excess_kurtosis(x):
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    d = x - mu
    var = (d * d).mean()
    if var == 0.0:
        return np.nan
    z = d / np.sqrt(var)
    return float((z ** 4).mean() - 3.0)


def quantile_linear(x, q):
    return float(np.quantile(np.asarray(x, dtype=np.float64), q, method="linear"))


def prefix_means(x):
    x = np.asarray(x, dtype=np.float64)
    return np.cumsum(x) / np.arange(1, x.shape[0] + 1)
