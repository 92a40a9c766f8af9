"""Weighted aggregation of rating histories into an opinion climate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .model import ModelError, RatingScale


class AggregationError(ModelError):
    pass


class EmptyHistory(AggregationError):
    pass


class WeightLengthMismatch(AggregationError):
    pass


class NonPositiveWeight(AggregationError):
    pass


UNIFORM = "UNIFORM"
CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class WeightRule:
    kind: str = UNIFORM
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (UNIFORM, CUSTOM):
            raise ModelError(f"unknown weight rule {self.kind!r}")
        if self.kind == CUSTOM:
            if self.weights is None:
                raise ModelError("CUSTOM rule needs weights")
            if any(not w > 0 for w in self.weights):
                raise NonPositiveWeight("CUSTOM weights must be strictly positive")

    @classmethod
    def custom(cls, weights: Sequence[float]) -> "WeightRule":
        return cls(CUSTOM, tuple(float(w) for w in weights))


@dataclass(frozen=True)
class OpinionHistogram:
    scale: RatingScale
    mass: tuple[float, ...]

    def __getitem__(self, level: int) -> float:
        """Mass at rating level ``level`` (1-based, like the scale)."""
        if not 1 <= level <= self.scale.levels_max:
            raise IndexError(level)
        return self.mass[level - 1]


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def bin_rating(r: float, scale: RatingScale) -> int:
    """Map a possibly fractional rating onto its integer level."""
    b = round_half_up(r)
    if not 1 <= b <= scale.levels_max:
        raise ModelError(f"rating {r} outside [1, {scale.levels_max}]")
    return b


def _weights(history, rule: WeightRule) -> list[float]:
    if rule.kind == UNIFORM:
        return [1.0] * len(history)
    if len(rule.weights) != len(history):
        raise WeightLengthMismatch(
            f"{len(rule.weights)} weights for a history of {len(history)} ratings"
        )
    return list(rule.weights)


def histogram(history: Sequence[float], scale: RatingScale, rule: WeightRule = WeightRule()) -> OpinionHistogram:
    """Fraction of (weighted) history mass at every level of the scale.

    Under the uniform rule this is the plain share of ratings equal to each
    level.
    """
    if len(history) == 0:
        raise EmptyHistory("history is empty")
    w = _weights(history, rule)
    num = [[] for _ in scale.levels]
    for r, a in zip(history, w):
        num[bin_rating(r, scale) - 1].append(a)
    total = math.fsum(w)
    return OpinionHistogram(scale, tuple(math.fsum(ws) / total for ws in num))


def climate(history: Sequence[float], scale: RatingScale, rule: WeightRule = WeightRule()) -> float:
    h = histogram(history, scale, rule)
    return math.fsum(level * m for level, m in zip(scale.levels, h.mass))


def running_climate(history: Sequence[float]) -> float:
    """Arithmetic mean of raw (unbinned) prior ratings.

    This is the value agents see: fractional ratings from multi-sample
    averaging enter unrounded.
    """
    if len(history) == 0:
        raise EmptyHistory("history is empty")
    return math.fsum(history) / len(history)


def format_climate_for_prompt(value: float, decimals: int = 1) -> str:
    if decimals < 0:
        raise ValueError("decimals must be >= 0")
    quantum = Decimal(1).scaleb(-decimals)
    # repr() gives the shortest round-tripping decimal, so 6.55 stays 6.55
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))
