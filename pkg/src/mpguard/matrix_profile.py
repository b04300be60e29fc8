"""Self-join Matrix Profile with similar-instance counting.

Pairwise distances are z-normalized Euclidean distances obtained from the
Pearson correlation of two windows, ``d = sqrt(2 m (1 - corr))``. The profile
walks every diagonal of the (implicit) distance matrix once and updates the
centered cross product in O(1) per step, so the total cost is O(n^2)
regardless of ``m``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .core import InvalidArgument, TimeSeries, _as_values, sliding_stats

# exact cross products are recomputed at this stride along each diagonal
REANCHOR_INTERVAL = 4096


@dataclass(frozen=True)
class MatrixProfileResult:
    distances: np.ndarray
    neighbor_index: np.ndarray
    window_length: int
    exclusion_radius: int
    similar_counts: Optional[np.ndarray] = None
    epsilon: Optional[float] = None

    def __len__(self):
        return self.distances.shape[0]


def default_exclusion(m: int) -> int:
    return int(math.ceil(m / 2))


def corr_to_distance(corr, m: int):
    """z-normalized Euclidean distance for a given Pearson correlation.

    ``corr`` is clamped to [-1, 1] first, so floating-point overshoot never
    produces NaN. Works on scalars and arrays.
    """
    c = np.clip(corr, -1.0, 1.0)
    d = np.sqrt(2.0 * m * (1.0 - c))
    if np.ndim(d) == 0:
        return float(d)
    return d


def _window_stats(x: np.ndarray, m: int):
    stats = sliding_stats(x, m)
    norms = np.sqrt(float(m)) * stats.stds
    inv = np.zeros_like(norms)
    ok = ~stats.constant
    inv[ok] = 1.0 / norms[ok]
    return stats, inv


def distance_profile(series, query_start: int, m: int) -> np.ndarray:
    """Distances from the window at ``query_start`` to every window.

    Flat windows follow the same convention as the full profile: two flat
    windows are at distance 0, a flat and a non-flat window at ``sqrt(2m)``.
    """
    x = _as_values(series)
    n = x.shape[0]
    if not isinstance(m, (int, np.integer)) or m < 2 or m > n:
        raise InvalidArgument(f"window length m={m!r} out of range for series of length {n}")
    count = n - m + 1
    if not isinstance(query_start, (int, np.integer)) or not 0 <= query_start < count:
        raise InvalidArgument(f"query_start={query_start!r} must lie in [0, {count - 1}]")
    m = int(m)
    stats, inv = _window_stats(x, m)
    y = x - x.mean()
    q = y[query_start:query_start + m]
    dots = np.correlate(y, q, mode="valid")
    mu = stats.means - x.mean()
    cov = dots - m * mu[query_start] * mu
    if stats.constant[query_start]:
        corr = np.where(stats.constant, 1.0, 0.0)
    else:
        corr = np.where(stats.constant, 0.0, cov * inv[query_start] * inv)
    dist = corr_to_distance(corr, m)
    dist[query_start] = 0.0
    return dist


@numba.njit(nogil=True, cache=True)
def _diagonal_kernel(x, mu, inv, const, m, k_lo, k_hi, epsilons, best, best_idx, counts):
    """Visit diagonals k_lo..k_hi-1 in increasing order.

    Row i sees candidates j = i + k in increasing order, so a strict ``>``
    keeps the lowest index on ties; row j sees i = j - k decreasing, so
    ``>=`` does the same.
    """
    count = mu.shape[0]
    n_eps = epsilons.shape[0]
    df = np.zeros(count)
    dg = np.zeros(count)
    for w in range(1, count):
        df[w] = 0.5 * (x[w + m - 1] - x[w - 1])
        dg[w] = (x[w + m - 1] - mu[w]) + (x[w - 1] - mu[w - 1])
    two_m = 2.0 * m
    for k in range(k_lo, k_hi):
        n_i = count - k
        for i0 in range(0, n_i, REANCHOR_INTERVAL):
            i1 = min(i0 + REANCHOR_INTERVAL, n_i)
            cov = 0.0
            for t in range(m):
                cov += (x[i0 + t] - mu[i0]) * (x[i0 + k + t] - mu[i0 + k])
            for i in range(i0, i1):
                j = i + k
                if i > i0:
                    cov += df[i] * dg[j] + df[j] * dg[i]
                if const[i] or const[j]:
                    c = 1.0 if (const[i] and const[j]) else 0.0
                else:
                    c = cov * inv[i] * inv[j]
                    if c > 1.0:
                        c = 1.0
                    elif c < -1.0:
                        c = -1.0
                if c > best[i]:
                    best[i] = c
                    best_idx[i] = j
                if c >= best[j]:
                    best[j] = c
                    best_idx[j] = i
                if n_eps > 0:
                    d = np.sqrt(two_m * (1.0 - c))
                    for e in range(n_eps):
                        if d < epsilons[e]:
                            counts[i, e] += 1
                            counts[j, e] += 1


def _partition_diagonals(k_lo: int, count: int, parts: int) -> list[tuple[int, int]]:
    """Split diagonals [k_lo, count) into contiguous ranges of similar work."""
    ks = np.arange(k_lo, count)
    work = np.cumsum(count - ks)
    total = work[-1]
    bounds = [k_lo]
    for p in range(1, parts):
        cut = int(np.searchsorted(work, total * p / parts)) + k_lo
        if cut > bounds[-1]:
            bounds.append(cut)
    bounds.append(count)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("MPGUARD_THREADS", "1") or 1)
    if threads < 1:
        raise InvalidArgument(f"threads must be >= 1, got {threads}")
    return int(threads)


def _validate(x: np.ndarray, m, exclusion_radius):
    n = x.shape[0]
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidArgument(f"window length m={m!r} must be an integer >= 2")
    if exclusion_radius is None:
        exclusion_radius = default_exclusion(int(m))
    if exclusion_radius < 0:
        raise InvalidArgument("exclusion_radius must be non-negative")
    if n < 2 * m + exclusion_radius:
        raise InvalidArgument(
            f"series of length {n} is too short for m={m} and exclusion_radius="
            f"{exclusion_radius}; need at least {2 * m + exclusion_radius}")
    return int(m), int(exclusion_radius)


def _run(x, m, exclusion_radius, epsilons, threads):
    stats, inv = _window_stats(x, m)
    count = x.shape[0] - m + 1
    mu = np.ascontiguousarray(stats.means)
    const = np.ascontiguousarray(stats.constant)
    eps = np.asarray(epsilons, dtype=np.float64).reshape(-1)
    ranges = _partition_diagonals(exclusion_radius + 1, count, threads)

    def work(rng):
        best = np.full(count, -np.inf)
        idx = np.full(count, -1, dtype=np.int64)
        counts = np.zeros((count, eps.shape[0]), dtype=np.int64)
        _diagonal_kernel(x, mu, inv, const, m, rng[0], rng[1], eps, best, idx, counts)
        return best, idx, counts

    if threads == 1 or len(ranges) == 1:
        parts = [work(r) for r in ranges]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, ranges))

    best, idx, counts = parts[0]
    for b, ix, cn in parts[1:]:
        take = (b > best) | ((b == best) & (ix < idx))
        best = np.where(take, b, best)
        idx = np.where(take, ix, idx)
        counts = counts + cn
    return best, idx, counts


def compute_matrix_profile(series, m: int, exclusion_radius: Optional[int] = None,
                           epsilon: Optional[float] = None,
                           threads: Optional[int] = None) -> MatrixProfileResult:
    """Self-join Matrix Profile of ``series``.

    Parameters
    ----------
    series : TimeSeries or array_like
    m : int
        Window length.
    exclusion_radius : int, optional
        Matches with ``|i - j| <= exclusion_radius`` are ignored. Defaults to
        ``ceil(m / 2)``.
    epsilon : float, optional
        When given, ``similar_counts`` is filled in the same pass.
    threads : int, optional
        Worker count; falls back to ``MPGUARD_THREADS``. Results do not depend
        on it.
    """
    x = np.ascontiguousarray(_as_values(series))
    m, exclusion_radius = _validate(x, m, exclusion_radius)
    if epsilon is not None and not epsilon >= 0:
        raise InvalidArgument(f"epsilon must be non-negative, got {epsilon}")
    eps = [] if epsilon is None else [float(epsilon)]
    best, idx, counts = _run(x, m, exclusion_radius, eps, resolve_threads(threads))
    distances = corr_to_distance(best, m)
    counts = np.ascontiguousarray(counts[:, 0]) if epsilon is not None else None
    for arr in (distances, idx, counts):
        if arr is not None:
            arr.flags.writeable = False
    return MatrixProfileResult(
        distances=distances,
        neighbor_index=idx,
        window_length=m,
        exclusion_radius=exclusion_radius,
        similar_counts=counts,
        epsilon=float(epsilon) if epsilon is not None else None,
    )


def count_similar(series, m: int, epsilon: float, exclusion_radius: Optional[int] = None,
                  threads: Optional[int] = None) -> np.ndarray:
    """Number of windows strictly closer than ``epsilon`` to each window."""
    if epsilon is None or not epsilon >= 0:
        raise InvalidArgument(f"epsilon must be non-negative, got {epsilon}")
    return compute_matrix_profile(series, m, exclusion_radius, epsilon, threads).similar_counts


def count_similar_many(series, m: int, epsilons: Sequence[float],
                       exclusion_radius: Optional[int] = None,
                       threads: Optional[int] = None) -> tuple[MatrixProfileResult, np.ndarray]:
    """Profile plus one count column per epsilon, all from a single pass."""
    x = np.ascontiguousarray(_as_values(series))
    m, exclusion_radius = _validate(x, m, exclusion_radius)
    eps = [float(e) for e in epsilons]
    if any(not e >= 0 for e in eps):
        raise InvalidArgument("every epsilon must be non-negative")
    best, idx, counts = _run(x, m, exclusion_radius, eps, resolve_threads(threads))
    result = MatrixProfileResult(distances=corr_to_distance(best, m), neighbor_index=idx,
                                 window_length=m, exclusion_radius=exclusion_radius)
    return result, counts


def resolve_epsilon(spec, distances: np.ndarray) -> float:
    """Turn an epsilon setting into a number.

    ``spec`` is a non-negative number, ``"auto:pNN"`` for the NN-th
    percentile of the profile distances (default policy ``auto:p5``), or
    ``"auto:mF"`` for F times their median.
    """
    if isinstance(spec, str):
        text = spec.strip().lower()
        if text.startswith("auto:p"):
            try:
                q = float(text[len("auto:p"):])
            except ValueError:
                raise InvalidArgument(f"bad epsilon setting {spec!r}") from None
            if not 0 <= q <= 100:
                raise InvalidArgument(f"epsilon percentile must be in [0, 100], got {q}")
            return float(np.percentile(distances, q))
        if text.startswith("auto:m"):
            try:
                factor = float(text[len("auto:m"):])
            except ValueError:
                raise InvalidArgument(f"bad epsilon setting {spec!r}") from None
            if not factor >= 0 or math.isinf(factor):
                raise InvalidArgument(f"epsilon factor must be finite and >= 0, got {factor}")
            return float(factor * np.median(distances))
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            spec = float(text)
        except ValueError:
            raise InvalidArgument(f"bad epsilon setting {spec!r}") from None
    value = float(spec)
    if not value >= 0:
        raise InvalidArgument(f"epsilon must be non-negative, got {value}")
    return value


def profile_with_counts(series, m: int, epsilon="auto:p5",
                        exclusion_radius: Optional[int] = None,
                        threads: Optional[int] = None) -> MatrixProfileResult:
    """Profile plus similar counts, resolving an ``auto:pNN`` epsilon first."""
    if isinstance(epsilon, str) and epsilon.strip().lower().startswith("auto:"):
        first = compute_matrix_profile(series, m, exclusion_radius, None, threads)
        eps = resolve_epsilon(epsilon, first.distances)
    else:
        eps = resolve_epsilon(epsilon, np.empty(0))
    return compute_matrix_profile(series, m, exclusion_radius, eps, threads)


def flag_runs(flags: np.ndarray, min_gap: int = 0) -> list[tuple[int, int]]:
    """Closed (start, end) runs of True, merging runs split by <= ``min_gap`` False steps."""
    flags = np.asarray(flags, dtype=bool)
    if not flags.any():
        return []
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    merged = [[int(starts[0]), int(ends[0])]]
    for s, e in zip(starts[1:], ends[1:]):
        if s - merged[-1][1] - 1 <= min_gap:
            merged[-1][1] = int(e)
        else:
            merged.append([int(s), int(e)])
    return [(s, e) for s, e in merged]


def detect_anomalies(result: MatrixProfileResult, distance_threshold: float,
                     count_threshold: int = 0, min_gap: int = 0) -> list[tuple[int, int]]:
    """Window-index intervals where the profile looks anomalous.

    A window is flagged when its distance exceeds ``distance_threshold`` or,
    if counts were computed, when it has fewer than ``count_threshold``
    similar instances. Flagged runs separated by at most ``min_gap`` unflagged
    windows are merged.
    """
    flags = result.distances > distance_threshold
    if result.similar_counts is not None and count_threshold > 0:
        flags = flags | (result.similar_counts < count_threshold)
    return flag_runs(flags, min_gap)


def windows_to_steps(intervals: Sequence[tuple[int, int]], m: int, n: int) -> list[tuple[int, int]]:
    """Map window-start intervals to the sample steps those windows cover."""
    out: list[tuple[int, int]] = []
    for s, e in intervals:
        s, e = int(s), min(int(e) + m - 1, n - 1)
        if out and s <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], e))
        else:
            out.append((s, e))
    return out
