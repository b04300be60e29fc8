"""Sequence types, z-normalization and sliding-window statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# window is treated as flat when std < CONSTANT_TOL * max(1, |mean|)
CONSTANT_TOL = 1e-8
# running sums are rebuilt from scratch at this stride
RESET_INTERVAL = 4096


class InvalidArgument(ValueError):
    """Raised when a caller passes arguments outside an operation's domain."""


@dataclass(frozen=True)
class TimeSeries:
    """One sensor channel sampled at a fixed interval.

    ``values`` is copied into a read-only float64 array on construction.
    """

    values: np.ndarray
    name: str = "series"
    sample_interval: float = 1.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise InvalidArgument("time series must contain at least one value")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise InvalidArgument(f"non-finite value at index {bad} in series {self.name!r}")
        if not self.sample_interval > 0:
            raise InvalidArgument("sample_interval must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WindowStats:
    means: np.ndarray
    stds: np.ndarray
    window_length: int
    # True where the window counts as constant under CONSTANT_TOL
    constant: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", is_constant(self.means, self.stds))


def is_constant(mean, std):
    return np.asarray(std) < CONSTANT_TOL * np.maximum(1.0, np.abs(mean))


def _as_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


def znormalize(window) -> np.ndarray:
    """Return ``(w - mean) / std`` using the population standard deviation.

    A constant window (see ``CONSTANT_TOL``) maps to all zeros.
    """
    w = np.asarray(window, dtype=np.float64).reshape(-1)
    if w.shape[0] < 2:
        raise InvalidArgument("znormalize needs a window of length >= 2")
    mu = w.mean()
    centered = w - mu
    sigma = np.sqrt(np.mean(centered * centered))
    if is_constant(mu, sigma):
        return np.zeros_like(w)
    return centered / sigma


def _direct_stats(x: np.ndarray, start: int, m: int) -> tuple[float, float]:
    w = x[start:start + m]
    mu = w.mean()
    c = w - mu
    return mu, float(np.sqrt(np.mean(c * c)))


def sliding_stats(series, m: int) -> WindowStats:
    """Mean and population std of every length-``m`` window in O(n).

    Running sums of x and x**2 are taken on the series shifted by its global
    mean (variance is shift-invariant) and rebuilt every ``RESET_INTERVAL``
    windows. Windows whose variance is tiny relative to their second moment
    lose precision to cancellation and are recomputed directly.
    """
    x = _as_values(series)
    n = x.shape[0]
    if not isinstance(m, (int, np.integer)) or m < 2 or m > n:
        raise InvalidArgument(f"window length m={m!r} must satisfy 2 <= m <= {n}")
    m = int(m)
    count = n - m + 1
    shift = x.mean()
    y = x - shift

    means = np.empty(count)
    var = np.empty(count)
    s1 = s2 = 0.0
    for i in range(count):
        if i % RESET_INTERVAL == 0:
            w = y[i:i + m]
            s1 = float(w.sum())
            s2 = float(np.dot(w, w))
        else:
            a, b = y[i - 1], y[i + m - 1]
            s1 += b - a
            s2 += b * b - a * a
        mu = s1 / m
        means[i] = mu
        var[i] = s2 / m - mu * mu

    second_moment = np.maximum(var + means * means, 0.0)
    suspect = np.flatnonzero(var <= 1e-6 * second_moment)
    means += shift
    stds = np.sqrt(np.maximum(var, 0.0))
    for i in suspect:
        means[i], stds[i] = _direct_stats(x, int(i), m)
    means.flags.writeable = False
    stds.flags.writeable = False
    return WindowStats(means=means, stds=stds, window_length=m)
