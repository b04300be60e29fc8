"""Feature preprocessing for the one-class baselines.

Every transform is split into a fit step on training rows and an apply step,
so test rows are always mapped with training statistics. Boolean columns
(actuator states) pass through the scaling transforms unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from .core import InvalidArgument

CONTINUOUS = "continuous"
BOOLEAN = "boolean"
VARIANTS = ("none", "zero_mean", "linear", "pca")
BOOL_MODES = ("bool", "non_bool")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    names: tuple
    kinds: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise InvalidArgument("feature matrix must be 2-D")
        names, kinds = tuple(self.names), tuple(self.kinds)
        if len(names) != vals.shape[1] or len(kinds) != vals.shape[1]:
            raise InvalidArgument("column schema does not match matrix width")
        for name, kind in zip(names, kinds):
            if kind not in (CONTINUOUS, BOOLEAN):
                raise InvalidArgument(f"unknown column kind {kind!r} for {name!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "kinds", kinds)

    @property
    def shape(self):
        return self.values.shape

    @property
    def continuous_mask(self) -> np.ndarray:
        return np.array([k == CONTINUOUS for k in self.kinds], dtype=bool)

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(values, self.names, self.kinds)

    def select(self, columns: Sequence[int]) -> "FeatureMatrix":
        columns = list(columns)
        return FeatureMatrix(self.values[:, columns], [self.names[c] for c in columns],
                             [self.kinds[c] for c in columns])

    def rows(self, index) -> "FeatureMatrix":
        return FeatureMatrix(self.values[index], self.names, self.kinds)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise InvalidArgument(f"no column named {name!r}") from None


def filter_boolean(m: FeatureMatrix, mode: str) -> FeatureMatrix:
    """``non_bool`` drops boolean columns; ``bool`` keeps everything."""
    if mode == "bool":
        return m
    if mode == "non_bool":
        return m.select([i for i, k in enumerate(m.kinds) if k != BOOLEAN])
    raise InvalidArgument(f"bool mode must be one of {BOOL_MODES}, got {mode!r}")


@dataclass(frozen=True)
class ColumnAffine:
    """Per-column ``(x - offset) / scale`` fitted on training data."""

    offset: np.ndarray
    scale: np.ndarray
    # columns with a fixed output value (constant during fit)
    fixed: np.ndarray = field(default=None)

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        if m.shape[1] != self.offset.shape[0]:
            raise InvalidArgument("column count differs from the fitted transform")
        out = (m.values - self.offset) / self.scale
        if self.fixed is not None:
            cols = ~np.isnan(self.fixed)
            out[:, cols] = self.fixed[cols]
        return m.with_values(out)


def fit_zero_mean(m: FeatureMatrix) -> ColumnAffine:
    _require_rows(m)
    cont = m.continuous_mask
    offset = np.where(cont, m.values.mean(axis=0), 0.0)
    return ColumnAffine(offset=offset, scale=np.ones(m.shape[1]))


def fit_linear_scale(m: FeatureMatrix) -> ColumnAffine:
    _require_rows(m)
    cont = m.continuous_mask
    lo, hi = m.values.min(axis=0), m.values.max(axis=0)
    span = hi - lo
    flat = cont & (span == 0)
    offset = np.where(cont, lo, 0.0)
    scale = np.where(cont & ~flat, span, 1.0)
    fixed = np.where(flat, 0.5, np.nan)
    return ColumnAffine(offset=offset, scale=scale, fixed=fixed)


def zero_mean(m: FeatureMatrix) -> FeatureMatrix:
    return fit_zero_mean(m).transform(m)


def linear_scale(m: FeatureMatrix) -> FeatureMatrix:
    """Min-max scale continuous columns to [0, 1]; constant columns become 0.5."""
    return fit_linear_scale(m).transform(m)


def _require_rows(m: FeatureMatrix):
    if m.shape[0] == 0:
        raise InvalidArgument("cannot fit a transform on zero rows")


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in non-increasing order and the matching unit
    eigenvectors as columns.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidArgument("jacobi_eigh needs a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InvalidArgument("jacobi_eigh needs a symmetric matrix")
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        # summed directly: sum(a*a) - sum(diag**2) cancels to zero too early
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


@dataclass(frozen=True)
class PcaModel:
    mean_vector: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    # full spectrum of the training covariance, for retention decisions
    total_variance: float = 0.0

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        if m.shape[1] != self.mean_vector.shape[0]:
            raise InvalidArgument("column count differs from the fitted PCA")
        proj = (m.values - self.mean_vector) @ self.components.T
        k = self.components.shape[0]
        return FeatureMatrix(proj, [f"pc{i + 1}" for i in range(k)], [CONTINUOUS] * k)

    def inverse_transform(self, projected: np.ndarray) -> np.ndarray:
        return np.asarray(projected) @ self.components + self.mean_vector


def pca_fit(m: FeatureMatrix, k: Union[int, float, None] = None) -> PcaModel:
    """Principal axes of the training rows.

    ``k`` is a component count, or a float in (0, 1] giving the cumulative
    explained-variance target; the default keeps the fewest components that
    explain at least 95% of the variance.
    """
    _require_rows(m)
    d = m.shape[1]
    X = m.values
    mean = X.mean(axis=0)
    centered = X - mean
    ddof = 1 if X.shape[0] > 1 else 0
    cov = centered.T @ centered / (X.shape[0] - ddof)
    cov = 0.5 * (cov + cov.T)
    vals, vecs = jacobi_eigh(cov)
    vals = np.maximum(vals, 0.0)
    total = float(vals.sum())
    if k is None:
        k = 0.95
    if isinstance(k, (int, np.integer)) and not isinstance(k, bool):
        if not 1 <= k <= d:
            raise InvalidArgument(f"k must be between 1 and {d}, got {k}")
        keep = int(k)
    elif isinstance(k, float) and 0.0 < k <= 1.0:
        if total == 0.0:
            keep = 1
        else:
            frac = np.cumsum(vals) / total
            keep = int(np.searchsorted(frac, k - 1e-12) + 1)
            keep = min(keep, d)
    else:
        raise InvalidArgument(f"k must be a component count or a variance fraction, got {k!r}")
    comps = vecs[:, :keep].T.copy()
    # fix the sign so the largest-magnitude loading of each axis is positive
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean_vector=mean, components=comps, explained_variance=vals[:keep].copy(),
                    total_variance=total)


def pca_transform(model: PcaModel, m: FeatureMatrix) -> FeatureMatrix:
    return model.transform(m)


class Preprocessor:
    """Bool filter followed by one preprocessing variant, fitted on training rows."""

    def __init__(self, variant: str = "none", bool_mode: str = "bool",
                 pca_k: Union[int, float, None] = None):
        if variant not in VARIANTS:
            raise InvalidArgument(f"preprocessing must be one of {VARIANTS}, got {variant!r}")
        if bool_mode not in BOOL_MODES:
            raise InvalidArgument(f"bool mode must be one of {BOOL_MODES}, got {bool_mode!r}")
        self.variant = variant
        self.bool_mode = bool_mode
        self.pca_k = pca_k
        self.columns: Optional[list] = None
        self.affine: Optional[ColumnAffine] = None
        self.pca: Optional[PcaModel] = None

    def fit(self, train: FeatureMatrix) -> "Preprocessor":
        kept = filter_boolean(train, self.bool_mode)
        self.columns = list(kept.names)
        if self.variant == "zero_mean":
            self.affine = fit_zero_mean(kept)
        elif self.variant == "linear":
            self.affine = fit_linear_scale(kept)
        elif self.variant == "pca":
            self.pca = pca_fit(kept, self.pca_k)
        return self

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        if self.columns is None:
            raise InvalidArgument("preprocessor used before fit")
        missing = [c for c in self.columns if c not in m.names]
        if missing:
            raise InvalidArgument(f"input lacks fitted columns: {missing}")
        out = m.select([m.names.index(c) for c in self.columns])
        if self.affine is not None:
            out = self.affine.transform(out)
        if self.pca is not None:
            out = self.pca.transform(out)
        return out

    def describe(self) -> dict:
        info = {"preprocess": self.variant, "bool_mode": self.bool_mode,
                "columns": list(self.columns or [])}
        if self.pca is not None:
            info["pca_components"] = int(self.pca.components.shape[0])
        return info

    def save(self, fh: TextIO) -> None:
        """``key value`` lines; vectors are space-separated ``repr`` floats."""
        fh.write("preprocess " + self.variant + "\n")
        fh.write("bool_mode " + self.bool_mode + "\n")
        fh.write("columns " + "\t".join(self.columns) + "\n")
        if self.affine is not None:
            fh.write("offset " + _vec(self.affine.offset) + "\n")
            fh.write("scale " + _vec(self.affine.scale) + "\n")
            fh.write("fixed " + _vec(self.affine.fixed if self.affine.fixed is not None
                                     else np.full(len(self.columns), np.nan)) + "\n")
        if self.pca is not None:
            fh.write("pca_mean " + _vec(self.pca.mean_vector) + "\n")
            fh.write("pca_variance " + _vec(self.pca.explained_variance) + "\n")
            fh.write(f"pca_total {self.pca.total_variance!r}\n")
            for row in self.pca.components:
                fh.write("pca_component " + _vec(row) + "\n")
        fh.write("end_preprocess\n")

    @classmethod
    def load(cls, lines: list) -> tuple["Preprocessor", int]:
        """Parse from a list of lines; returns the object and lines consumed."""
        fields: dict = {}
        comps = []
        used = 0
        for used, line in enumerate(lines, start=1):
            key, _, rest = line.rstrip("\n").partition(" ")
            if key == "end_preprocess":
                break
            if key == "pca_component":
                comps.append(_unvec(rest))
            else:
                fields[key] = rest
        else:
            raise InvalidArgument("unterminated preprocessing block")
        pre = cls(fields["preprocess"], fields["bool_mode"])
        pre.columns = fields["columns"].split("\t") if fields["columns"] else []
        if "offset" in fields:
            fixed = _unvec(fields["fixed"])
            pre.affine = ColumnAffine(_unvec(fields["offset"]), _unvec(fields["scale"]),
                                      fixed if np.any(~np.isnan(fixed)) else None)
        if "pca_mean" in fields:
            pre.pca = PcaModel(_unvec(fields["pca_mean"]), np.array(comps),
                               _unvec(fields["pca_variance"]), float(fields["pca_total"]))
        return pre, used


def _vec(a) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a).reshape(-1))


def _unvec(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split()], dtype=np.float64)
