import math
import random

import pytest
from hypothesis import given, strategies as st

from spiral_sim.aggregation import (
    EmptyHistory, NonPositiveWeight, WeightLengthMismatch, WeightRule, bin_rating,
    climate, format_climate_for_prompt, histogram, running_climate,
)
from spiral_sim.model import RatingScale

M10 = RatingScale(10)


def test_single_level_history():
    h = histogram([7, 7, 7], M10)
    assert h[7] == 1.0
    assert sum(h.mass) == 1.0
    assert all(h[m] == 0 for m in M10.levels if m != 7)
    assert climate([7, 7, 7], M10) == 7.0


def test_custom_weights_hand_evaluated():
    # sum of weights 4: level 2 gets 1/4, level 8 gets 3/4
    rule = WeightRule.custom([1, 3])
    h = histogram([2, 8], M10, rule)
    assert h[2] == 0.25 and h[8] == 0.75
    assert climate([2, 8], M10, rule) == 0.25 * 2 + 0.75 * 8 == 6.5


def test_uniform_fraction_count():
    h = histogram([6, 6, 3, 9], M10)
    assert (h[6], h[3], h[9]) == (0.5, 0.25, 0.25)


def test_random_history_climate_is_mean():
    rng = random.Random(11)
    hist = [rng.randint(1, 10) for _ in range(50)]
    assert abs(climate(hist, M10) - sum(hist) / len(hist)) < 1e-12


def test_errors():
    with pytest.raises(EmptyHistory):
        histogram([], M10)
    with pytest.raises(EmptyHistory):
        climate([], M10)
    with pytest.raises(WeightLengthMismatch):
        histogram([1, 2], M10, WeightRule.custom([1]))
    with pytest.raises(NonPositiveWeight):
        WeightRule.custom([1, 0])


def test_fractional_ratings_bin_half_up():
    assert bin_rating(5.5, M10) == 6
    assert bin_rating(8.333333333333334, M10) == 8
    assert bin_rating(6.666666666666667, M10) == 7
    assert histogram([5.5, 4.4], M10)[6] == 0.5


def test_running_climate_uses_raw_values():
    assert running_climate([5.5, 6.0]) == 5.75
    with pytest.raises(EmptyHistory):
        running_climate([])


@pytest.mark.parametrize("value, decimals, text", [
    (6.4499, 1, "6.4"),
    (7.0, 1, "7.0"),
    (6.55, 1, "6.6"),
    (6.25, 1, "6.3"),
    (6.05, 1, "6.1"),
    (7.333333333333333, 2, "7.33"),
    (6.5, 0, "7"),
])
def test_format_climate(value, decimals, text):
    assert format_climate_for_prompt(value, decimals) == text


histories = st.lists(st.integers(1, 10), min_size=1, max_size=200)


@given(histories)
def test_mass_sums_to_one_and_climate_in_range(hist):
    h = histogram(hist, M10)
    assert abs(sum(h.mass) - 1) < 1e-9
    assert all(0 <= m <= 1 for m in h.mass)
    assert 1 <= climate(hist, M10) <= 10


@given(histories)
def test_uniform_climate_equals_mean(hist):
    assert abs(climate(hist, M10) - math.fsum(hist) / len(hist)) < 1e-12


@given(st.lists(st.tuples(st.integers(1, 10), st.floats(0.01, 100)), min_size=1, max_size=60),
       st.floats(1e-3, 1e3))
def test_custom_weight_scale_invariance(pairs, c):
    ratings = [r for r, _ in pairs]
    w = [a for _, a in pairs]
    h1 = histogram(ratings, M10, WeightRule.custom(w))
    h2 = histogram(ratings, M10, WeightRule.custom([a * c for a in w]))
    assert max(abs(a - b) for a, b in zip(h1.mass, h2.mass)) < 1e-12
    assert abs(climate(ratings, M10, WeightRule.custom(w))
               - climate(ratings, M10, WeightRule.custom([a * c for a in w]))) < 1e-12
