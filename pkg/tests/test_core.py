import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mpguard.core import InvalidArgument, TimeSeries, sliding_stats, znormalize
from oracles import naive_stats, naive_znorm

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_znormalize_hand_example():
    r = math.sqrt(1.5)
    np.testing.assert_allclose(znormalize([1, 2, 3]), [-r, 0.0, r], atol=1e-15)


def test_znormalize_constant_window_is_zero():
    assert znormalize([5, 5, 5, 5]).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_znormalize_rejects_short_window():
    with pytest.raises(InvalidArgument):
        znormalize([1.0])


@given(arrays(np.float64, st.integers(2, 60), elements=finite))
def test_znormalize_idempotent_and_matches_oracle(w):
    z = znormalize(w)
    np.testing.assert_allclose(znormalize(z), z, atol=1e-12)
    np.testing.assert_allclose(z, naive_znorm(w), atol=1e-8)


@given(arrays(np.float64, st.integers(2, 60), elements=finite))
def test_znormalize_moments(w):
    z = znormalize(w)
    if z.any():
        assert abs(z.mean()) <= 1e-10
        assert abs(z.std() - 1.0) <= 1e-10


def test_sliding_stats_means_example():
    s = sliding_stats(TimeSeries([1, 2, 3, 4]), 2)
    np.testing.assert_allclose(s.means, [1.5, 2.5, 3.5])
    np.testing.assert_allclose(s.stds, [0.5, 0.5, 0.5])
    assert s.window_length == 2


@pytest.mark.parametrize("m", [2, 7, 30])
def test_sliding_stats_constant_series(m):
    s = sliding_stats(np.full(40, 3.25), m)
    assert np.all(s.stds == 0.0)
    assert np.all(s.constant)


def test_sliding_stats_random_matches_naive():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1000)
    s = sliding_stats(x, 50)
    mu, sd = naive_stats(x, 50)
    assert np.max(np.abs(s.means - mu) / np.maximum(np.abs(mu), 1e-300)) < 1e-9
    assert np.max(np.abs(s.stds - sd) / sd) < 1e-9


def test_sliding_stats_hundred_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(10, 300))
        m = int(rng.integers(2, n + 1))
        x = rng.normal(loc=rng.uniform(-50, 50), scale=rng.uniform(0.1, 10), size=n)
        s = sliding_stats(x, m)
        mu, sd = naive_stats(x, m)
        np.testing.assert_allclose(s.means, mu, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(s.stds, sd, rtol=1e-9, atol=1e-12)


def test_sliding_stats_long_series_beyond_reset_interval():
    rng = np.random.default_rng(3)
    x = 1e4 + np.cumsum(rng.normal(size=10_000))
    s = sliding_stats(x, 64)
    mu, sd = naive_stats(x, 64)
    np.testing.assert_allclose(s.means, mu, rtol=1e-9)
    np.testing.assert_allclose(s.stds, sd, rtol=1e-9)


def test_sliding_stats_flat_segment_inside_large_offset():
    x = np.concatenate([np.linspace(0, 1e6, 500), np.full(200, 1e6), np.linspace(1e6, 0, 300)])
    s = sliding_stats(x, 50)
    assert np.all(s.stds[500:651] == 0.0)
    assert np.all(s.constant[500:651])


def test_sliding_stats_deterministic_and_lengths():
    x = np.random.default_rng(4).normal(size=333)
    a, b = sliding_stats(x, 17), sliding_stats(x, 17)
    assert a.means.tobytes() == b.means.tobytes()
    assert a.stds.tobytes() == b.stds.tobytes()
    assert a.means.shape == (333 - 17 + 1,)
    assert np.all(a.stds >= 0)


@pytest.mark.parametrize("m", [0, 1, 11, 2.5])
def test_sliding_stats_bad_window(m):
    with pytest.raises(InvalidArgument):
        sliding_stats(np.arange(10.0), m)


def test_timeseries_validation():
    ts = TimeSeries([1, 2, 3], name="LIT-301")
    assert len(ts) == 3
    with pytest.raises(ValueError):
        ts.values[0] = 5.0
    with pytest.raises(InvalidArgument):
        TimeSeries([])
    with pytest.raises(InvalidArgument, match="index 1"):
        TimeSeries([1.0, float("nan")])
    with pytest.raises(InvalidArgument):
        TimeSeries([1.0], sample_interval=0)
