"""Isolation Forest built from scratch on a portable RNG.

Each tree is grown on a random subsample by picking a random attribute with
non-zero range and a split value uniformly inside that range, until the
height limit is hit, one point remains, or all remaining points are equal.
Short average isolation paths mark anomalies.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .core import InvalidArgument
from .rng import XorShift64Star

EULER_GAMMA = 0.5772156649
FORMAT_TAG = "mpguard-iforest 1"


def average_path_length(n) -> float:
    """c(n): mean unsuccessful-search depth of a BST with n keys.

    c(0) = c(1) = 0 and c(2) = 1; otherwise 2 H(n-1) - 2 (n-1) / n with
    H(i) approximated by ln(i) + Euler's constant.
    """
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass(frozen=True)
class TreeNode:
    """One node of an isolation tree, stored in preorder.

    Internal nodes carry ``feature``/``split`` and child positions; external
    nodes carry ``size``, the number of training points that reached them.
    """

    feature: int = -1
    split: float = 0.0
    left: int = -1
    right: int = -1
    size: int = 0

    @property
    def is_external(self) -> bool:
        return self.left < 0


class IsolationTree:
    def __init__(self, nodes):
        self.nodes = tuple(nodes)
        self._feature = np.array([nd.feature for nd in self.nodes], dtype=np.int64)
        self._split = np.array([nd.split for nd in self.nodes], dtype=np.float64)
        self._left = np.array([nd.left for nd in self.nodes], dtype=np.int64)
        self._right = np.array([nd.right for nd in self.nodes], dtype=np.int64)
        self._leaf_c = np.array(
            [average_path_length(nd.size) if nd.is_external else 0.0 for nd in self.nodes])

    def depth(self) -> int:
        depths = [0] * len(self.nodes)
        for i, nd in enumerate(self.nodes):
            if not nd.is_external:
                depths[nd.left] = depths[nd.right] = depths[i] + 1
        return max(depths)

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        edges = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        active = self._left[node] >= 0
        while active.any():
            a = node[active]
            go_left = X[rows[active], self._feature[a]] < self._split[a]
            node[active] = np.where(go_left, self._left[a], self._right[a])
            edges[active] += 1.0
            active = self._left[node] >= 0
        return edges + self._leaf_c[node]


def _grow(X: np.ndarray, rows: np.ndarray, depth: int, limit: int,
          rng: XorShift64Star, nodes: list) -> int:
    pos = len(nodes)
    nodes.append(None)
    if depth >= limit or rows.shape[0] <= 1:
        nodes[pos] = TreeNode(size=int(rows.shape[0]))
        return pos
    sub = X[rows]
    lo, hi = sub.min(axis=0), sub.max(axis=0)
    candidates = np.flatnonzero(hi > lo)
    if candidates.size == 0:
        nodes[pos] = TreeNode(size=int(rows.shape[0]))
        return pos
    q = int(candidates[rng.below(candidates.size)])
    p = lo[q] + rng.uniform_open() * (hi[q] - lo[q])
    if p <= lo[q]:
        p = float(np.nextafter(lo[q], hi[q]))
    mask = sub[:, q] < p
    left = _grow(X, rows[mask], depth + 1, limit, rng, nodes)
    right = _grow(X, rows[~mask], depth + 1, limit, rng, nodes)
    nodes[pos] = TreeNode(feature=q, split=float(p), left=left, right=right)
    return pos


def _build_tree(X: np.ndarray, psi: int, limit: int, seed: int, tree_id: int) -> IsolationTree:
    rng = XorShift64Star(seed, stream=tree_id + 1)
    rows = np.array(rng.sample_without_replacement(X.shape[0], psi), dtype=np.int64)
    nodes: list = []
    _grow(X, rows, 0, limit, rng, nodes)
    return IsolationTree(nodes)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    subsample_size: int
    height_limit: int
    n_trees: int
    seed: int
    n_features: int
    contamination: float = 0.05
    threshold: float = 0.5

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise InvalidArgument(
                f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def path_lengths(self, X) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.path_lengths(X)
        return total / len(self.trees)

    def scores(self, X) -> np.ndarray:
        c = average_path_length(self.subsample_size)
        if c == 0.0:
            return np.full(self._check(X).shape[0], 0.5)
        return np.power(2.0, -self.path_lengths(X) / c)

    def predict(self, X) -> np.ndarray:
        """1 for rows scored above the contamination threshold, else 0."""
        return (self.scores(X) > self.threshold).astype(np.int64)


def fit_forest(data, n_trees: int = 100, subsample: int = 256, seed: int = 0,
               height_limit: Optional[int] = None, contamination: float = 0.05,
               threads: int = 1) -> ForestModel:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgument("isolation forest needs a non-empty 2-D data matrix")
    if n_trees <= 0:
        raise InvalidArgument(f"n_trees must be positive, got {n_trees}")
    if subsample <= 0:
        raise InvalidArgument(f"subsample must be positive, got {subsample}")
    if not 0.0 <= contamination < 1.0:
        raise InvalidArgument(f"contamination must be in [0, 1), got {contamination}")
    psi = min(int(subsample), X.shape[0])
    if height_limit is None:
        height_limit = int(math.ceil(math.log2(psi))) if psi > 1 else 0
    X = np.ascontiguousarray(X)

    def build(t):
        return _build_tree(X, psi, height_limit, seed, t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(build, range(n_trees)))
    else:
        trees = tuple(build(t) for t in range(n_trees))
    model = ForestModel(trees=trees, subsample_size=psi, height_limit=height_limit,
                        n_trees=n_trees, seed=seed, n_features=X.shape[1],
                        contamination=contamination)
    threshold = _contamination_threshold(model.scores(X), contamination)
    return ForestModel(trees=trees, subsample_size=psi, height_limit=height_limit,
                       n_trees=n_trees, seed=seed, n_features=X.shape[1],
                       contamination=contamination, threshold=threshold)


def _contamination_threshold(scores: np.ndarray, fraction: float) -> float:
    """Score cut so that about ``fraction`` of ``scores`` lie strictly above it."""
    if fraction <= 0:
        return float(np.max(scores))
    return float(np.quantile(scores, 1.0 - fraction, method="lower"))


def path_length(model: ForestModel, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(model.path_lengths(x.reshape(1, -1))[0])


def anomaly_score(model: ForestModel, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(model.scores(x.reshape(1, -1))[0])


def rank_anomalies(model: ForestModel, data) -> list[tuple[int, float]]:
    """Rows ordered by ascending mean path length; ties keep row order."""
    lengths = model.path_lengths(data)
    order = np.argsort(lengths, kind="stable")
    return [(int(i), float(lengths[i])) for i in order]


def save_forest(model: ForestModel, fh: TextIO) -> None:
    """Write the model as plain text.

    Header lines are ``key value``; each tree is a ``tree <id> <nodes>`` line
    followed by its nodes in preorder, ``I <feature> <split>`` for internal
    and ``E <size>`` for external nodes. Floats use ``repr`` (exact round trip).
    """
    fh.write(FORMAT_TAG + "\n")
    for key in ("n_trees", "subsample_size", "height_limit", "seed", "n_features"):
        fh.write(f"{key} {getattr(model, key)}\n")
    fh.write(f"contamination {model.contamination!r}\n")
    fh.write(f"threshold {model.threshold!r}\n")
    for t, tree in enumerate(model.trees):
        fh.write(f"tree {t} {len(tree.nodes)}\n")
        for nd in tree.nodes:
            if nd.is_external:
                fh.write(f"E {nd.size}\n")
            else:
                fh.write(f"I {nd.feature} {nd.split!r}\n")


def _parse_preorder(records: list[list[str]]) -> list[TreeNode]:
    nodes: list = [None] * len(records)
    cursor = 0

    def visit() -> int:
        nonlocal cursor
        pos = cursor
        rec = records[pos]
        cursor += 1
        if rec[0] == "E":
            nodes[pos] = TreeNode(size=int(rec[1]))
        elif rec[0] == "I":
            left = visit()
            right = visit()
            nodes[pos] = TreeNode(feature=int(rec[1]), split=float(rec[2]),
                                  left=left, right=right)
        else:
            raise InvalidArgument(f"bad node record {' '.join(rec)!r}")
        return pos

    visit()
    if cursor != len(records):
        raise InvalidArgument("tree record count does not match its structure")
    return nodes


def load_forest(fh: TextIO) -> ForestModel:
    lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines or " ".join(lines[0]) != FORMAT_TAG:
        raise InvalidArgument("not an mpguard isolation forest file")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos][0] != "tree":
        header[lines[pos][0]] = lines[pos][1]
        pos += 1
    trees = []
    while pos < len(lines):
        count = int(lines[pos][2])
        trees.append(IsolationTree(_parse_preorder(lines[pos + 1:pos + 1 + count])))
        pos += 1 + count
    if len(trees) != int(header["n_trees"]):
        raise InvalidArgument("tree count does not match header")
    return ForestModel(trees=tuple(trees), subsample_size=int(header["subsample_size"]),
                       height_limit=int(header["height_limit"]), n_trees=int(header["n_trees"]),
                       seed=int(header["seed"]), n_features=int(header["n_features"]),
                       contamination=float(header["contamination"]),
                       threshold=float(header["threshold"]))
