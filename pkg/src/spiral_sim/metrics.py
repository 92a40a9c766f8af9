"""Opinion-trend and rating-concentration statistics.

The trend statistics work on the majority-conforming-opinion (MCO) series:
the larger of the cumulative positive and negative rating shares at each
step. Concentration statistics work on the last ``l`` ratings of a
sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .aggregation import round_half_up
from .model import ModelError, RatingSequence

POSITIVE = "POSITIVE"
NEGATIVE = "NEGATIVE"


class MetricError(ModelError):
    pass


class SequenceTooShort(MetricError):
    pass


class SeriesTooShort(MetricError):
    pass


class ConstantSeries(MetricError):
    """Spearman correlation is undefined when every value is tied."""


class ZeroVariance(MetricError):
    """Kurtosis is undefined for a window with no spread."""


@dataclass(frozen=True)
class McoStep:
    k: int
    pos: float
    neg: float
    mco: float


@dataclass(frozen=True)
class McoSeries:
    movie_id: str
    start_round: int
    steps: tuple[McoStep, ...]

    @property
    def values(self) -> np.ndarray:
        return np.fromiter((s.mco for s in self.steps), dtype=np.float64, count=len(self.steps))

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class MetricReport:
    movie_id: str
    mann_kendall_s: int
    mk_p_value: float | None
    spearman_rho: float | None  # None: every MCO value tied
    kurtosis_late: float | None  # None: zero-variance window
    iqr_late: float
    n_trend: int
    l_window: int

    @property
    def max_abs_s(self) -> int:
        return self.n_trend * (self.n_trend - 1) // 2


def classify(rating: float, threshold: float = 6.0) -> str:
    return POSITIVE if round_half_up(rating) >= threshold else NEGATIVE


def _positive_flags(ratings: Sequence[float], threshold: float) -> np.ndarray:
    return np.fromiter(
        (round_half_up(r) >= threshold for r in ratings), dtype=np.int64, count=len(ratings)
    )


def mco_from_ratings(
    ratings: Sequence[float], threshold: float = 6.0, start_round: int = 1, movie_id: str = ""
) -> McoSeries:
    if start_round < 1:
        raise ValueError("start_round is 1-based")
    if len(ratings) < start_round:
        raise SequenceTooShort(f"{len(ratings)} ratings, start_round {start_round}")
    pos, neg, mco = kernels.cumulative_mco(_positive_flags(ratings, threshold))
    steps = tuple(
        McoStep(k, float(pos[k - 1]), float(neg[k - 1]), float(mco[k - 1]))
        for k in range(start_round, len(ratings) + 1)
    )
    return McoSeries(movie_id, start_round, steps)


def mco_series(seq: RatingSequence, threshold: float = 6.0, start_round: int | None = None) -> McoSeries:
    """MCO series of a sequence; counts always run from the first event.

    ``start_round`` (1-based) only trims which steps are reported; it
    defaults to the warm-up length (at least 1).
    """
    if start_round is None:
        start_round = max(1, seq.warmup_len)
    return mco_from_ratings(seq.ratings(), threshold, start_round, seq.movie_id)


def _as_values(series) -> np.ndarray:
    if isinstance(series, McoSeries):
        return series.values
    return np.asarray(series, dtype=np.float64)


def mann_kendall_s(series) -> tuple[int, float]:
    """Mann-Kendall S and its two-sided normal-approximation p-value.

    The variance is tie-corrected and a continuity correction of 1 is
    applied to S. A fully tied series has zero variance and p = 1.
    """
    x = _as_values(series)
    n = x.shape[0]
    if n < 2:
        raise SeriesTooShort(f"need at least 2 points, got {n}")
    s = kernels.mk_s(x)
    t = kernels.tie_group_sizes(x).astype(np.float64)
    var = (n * (n - 1) * (2 * n + 5) - float(np.sum(t * (t - 1) * (2 * t + 5)))) / 18.0
    if var <= 0:
        return s, 1.0
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    return s, math.erfc(abs(z) / math.sqrt(2.0))


def spearman_rho(series) -> float:
    """Rank correlation of the series against its time steps.

    Tied values take their average rank; with no ties this coincides with
    the ``1 - 6 sum(d^2) / (n (n^2 - 1))`` form.
    """
    x = _as_values(series)
    n = x.shape[0]
    if n < 2:
        raise SeriesTooShort(f"need at least 2 points, got {n}")
    if np.all(x == x[0]):
        raise ConstantSeries("all values tied; rank correlation undefined")
    time_ranks = np.arange(1, n + 1, dtype=np.float64)
    ranks = kernels.average_ranks(x)
    # sqrt rounding can leave a perfectly monotone series one ulp short of +-1
    if np.array_equal(ranks, time_ranks):
        return 1.0
    if np.array_equal(ranks, time_ranks[::-1]):
        return -1.0
    rho = kernels.pearson(ranks, time_ranks)
    return float(min(1.0, max(-1.0, rho)))


def late_window(seq: RatingSequence | Sequence[float], l: int) -> list[float]:
    ratings = seq.ratings() if isinstance(seq, RatingSequence) else list(seq)
    if l < 1:
        raise ValueError("l must be positive")
    if len(ratings) < l:
        raise SequenceTooShort(f"{len(ratings)} ratings, window {l}")
    return ratings[-l:]


def excess_kurtosis(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=np.float64)
    if x.shape[0] < 2:
        raise SequenceTooShort("kurtosis needs at least 2 values")
    k = kernels.excess_kurtosis(x)
    if math.isnan(k):
        raise ZeroVariance("window has zero variance")
    return k


def iqr(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=np.float64)
    if x.shape[0] == 0:
        raise SequenceTooShort("iqr needs at least one value")
    return max(0.0, kernels.quantile_linear(x, 0.75) - kernels.quantile_linear(x, 0.25))


def rating_distance(rating: float, history_avg: float) -> float:
    return abs(rating - history_avg)


def metric_report(
    seq: RatingSequence,
    threshold: float = 6.0,
    l: int = 30,
    start_round: int | None = None,
    include_warmups: bool = True,
) -> MetricReport:
    """All per-movie statistics for one sequence.

    With ``include_warmups=False`` the warm-up prefix is dropped before the
    MCO counts are taken and trend analysis starts at the first agent
    rating; the late window is unaffected unless it would reach into the
    warm-ups.
    """
    if include_warmups:
        ratings = seq.ratings()
        start = max(1, seq.warmup_len) if start_round is None else start_round
    else:
        ratings = [ev.rating for ev in seq.agent_events()]
        start = 1 if start_round is None else start_round
    series = mco_from_ratings(ratings, threshold, start, seq.movie_id)
    s, p = mann_kendall_s(series)
    try:
        rho = spearman_rho(series)
    except ConstantSeries:
        rho = None
    window = late_window(ratings, l)
    try:
        kurt = excess_kurtosis(window)
    except ZeroVariance:
        kurt = None
    return MetricReport(
        movie_id=seq.movie_id,
        mann_kendall_s=s,
        mk_p_value=p,
        spearman_rho=rho,
        kurtosis_late=kurt,
        iqr_late=iqr(window),
        n_trend=len(series),
        l_window=l,
    )
