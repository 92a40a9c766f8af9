"""Both kernel backends against the brute-force oracles."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles

series = st.lists(st.sampled_from([0.5, 0.6, 2 / 3, 0.75, 0.8, 1.0]), min_size=2, max_size=40)
reals = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=40)


def test_backend_selected_by_env(monkeypatch):
    import importlib
    import spiral_sim.kernels as k
    monkeypatch.setenv("SPIRAL_SIM_NUMBA", "0")
    try:
        assert importlib.reload(k).BACKEND == "numpy"
    finally:
        monkeypatch.delenv("SPIRAL_SIM_NUMBA")
        importlib.reload(k)


def test_mk_s_matches_pairs(impl):
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = rng.integers(0, 5, rng.integers(2, 60)).astype(float)
        assert impl.mk_s(x) == oracles.mk_pairs(list(x))


def test_mk_s_long_series_chunks(impl):
    x = np.random.default_rng(0).random(3000)
    assert impl.mk_s(x) == oracles.mk_pairs(list(x))


def test_average_ranks(impl):
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.integers(0, 6, rng.integers(1, 30)).astype(float)
        assert impl.average_ranks(x).tolist() == oracles.avg_ranks(list(x))


@given(series)
def test_tie_groups(x):
    from spiral_sim.kernels import implementations
    expect = sorted({v: x.count(v) for v in x}.values())
    for impl in implementations().values():
        assert sorted(impl.tie_group_sizes(np.array(x)).tolist()) == expect


@given(reals)
@settings(max_examples=200)
def test_kurtosis_and_quantiles(x):
    from spiral_sim.kernels import implementations
    for impl in implementations().values():
        k = impl.excess_kurtosis(np.array(x))
        if np.ptp(x) == 0 or np.std(x) < 1e-6:
            continue
        assert k == pytest.approx(oracles.kurtosis_def(x), rel=1e-9, abs=1e-9)
        for q in (0.25, 0.5, 0.75):
            assert impl.quantile_linear(np.array(x), q) == pytest.approx(oracles.quantile_def(x, q), abs=1e-12)


def test_kurtosis_zero_variance_is_nan(impl):
    assert np.isnan(impl.excess_kurtosis(np.full(5, 3.0)))


def test_cumulative_mco_matches_recount(impl):
    rng = np.random.default_rng(9)
    r = rng.integers(1, 11, 40)
    pos, neg, mco = impl.cumulative_mco((r >= 6).astype(np.int64))
    ref = oracles.recount_mco(list(r))
    assert [tuple(t) for t in zip(pos, neg, mco)] == ref


def test_backends_agree():
    from spiral_sim.kernels import implementations
    impls = implementations()
    if len(impls) < 2:
        pytest.skip("numba not installed")
    x = np.random.default_rng(1).random(101)
    a, b = impls["numpy"], impls["numba"]
    assert a.mk_s(x) == b.mk_s(x)
    assert a.pearson(x, x[::-1]) == pytest.approx(b.pearson(x, x[::-1]), abs=1e-14)
    assert np.allclose(a.prefix_means(x), b.prefix_means(x), rtol=0, atol=1e-14)
