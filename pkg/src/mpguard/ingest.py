"""Loading SWaT-style process logs.

The expected file is UTF-8 CSV with a header row, an optional timestamp
column, one column per sensor/actuator and a label column holding
``Normal``/``Attack`` (case-insensitive, surrounding whitespace ignored) or
``0``/``1``. Column names are configurable through a ``key=value`` schema
file; see ``SchemaConfig``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import InvalidArgument, TimeSeries
from .preprocess import BOOLEAN, CONTINUOUS, FeatureMatrix


class IngestError(InvalidArgument):
    """Malformed input file; the message names the offending line."""


@dataclass(frozen=True)
class LabelIntervals:
    per_step: np.ndarray
    intervals: tuple

    @classmethod
    def from_per_step(cls, per_step) -> "LabelIntervals":
        labels = np.asarray(per_step, dtype=np.int64).reshape(-1)
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise InvalidArgument("labels must be 0 or 1")
        labels = labels.copy()
        labels.flags.writeable = False
        return cls(per_step=labels, intervals=tuple(runs_of_ones(labels)))

    @classmethod
    def from_intervals(cls, intervals, length: int) -> "LabelIntervals":
        labels = np.zeros(length, dtype=np.int64)
        for s, e in intervals:
            if not 0 <= s <= e < length:
                raise InvalidArgument(f"interval ({s}, {e}) outside [0, {length - 1}]")
            labels[s:e + 1] = 1
        return cls.from_per_step(labels)

    def __len__(self):
        return self.per_step.shape[0]


def runs_of_ones(labels) -> list[tuple[int, int]]:
    """Closed (start, end) index pairs of each maximal run of 1s."""
    labels = np.asarray(labels).astype(np.int8)
    edges = np.diff(np.concatenate(([0], labels, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


@dataclass(frozen=True)
class Dataset:
    features: FeatureMatrix
    labels: LabelIntervals
    timestamps: Optional[tuple] = None
    source: str = ""

    def __post_init__(self):
        n = self.features.shape[0]
        if len(self.labels) != n:
            raise InvalidArgument(f"{len(self.labels)} labels for {n} feature rows")
        if self.timestamps is not None and len(self.timestamps) != n:
            raise InvalidArgument(f"{len(self.timestamps)} timestamps for {n} feature rows")

    def __len__(self):
        return self.features.shape[0]

    def channel(self, name: str) -> TimeSeries:
        return TimeSeries(self.features.column(name), name=name)

    def rows(self, index) -> "Dataset":
        idx = np.arange(len(self))[index]
        ts = None if self.timestamps is None else tuple(self.timestamps[i] for i in idx)
        return Dataset(self.features.rows(idx),
                       LabelIntervals.from_per_step(self.labels.per_step[idx]), ts, self.source)


@dataclass(frozen=True)
class SchemaConfig:
    """Column naming for ``load_csv``.

    ``boolean_columns``/``continuous_columns`` override the inferred kind of
    the listed columns; ``drop_columns`` are ignored entirely.
    """

    timestamp_column: str = "Timestamp"
    label_column: str = "Normal/Attack"
    label_attack_token: str = "Attack"
    label_normal_token: str = "Normal"
    boolean_columns: tuple = ()
    continuous_columns: tuple = ()
    drop_columns: tuple = ()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SchemaConfig":
        return cls.from_mapping(read_key_values(path))

    @classmethod
    def from_mapping(cls, values: dict) -> "SchemaConfig":
        cfg = cls()
        known = {f for f in cls.__dataclass_fields__}
        updates = {}
        for key, raw in values.items():
            if key not in known:
                raise InvalidArgument(f"unknown schema key {key!r}")
            if key.endswith("_columns"):
                updates[key] = tuple(c.strip() for c in raw.split(",") if c.strip())
            else:
                updates[key] = raw
        return replace(cfg, **updates)


def read_key_values(path: Union[str, Path]) -> dict:
    """Parse a ``key=value`` file; ``#`` starts a comment line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            if not sep:
                raise IngestError(f"{path}:{lineno}: expected key=value, got {text!r}")
            out[key.strip()] = value.strip()
    return out


def _parse_label(token: str, schema: SchemaConfig, lineno: int) -> int:
    t = token.strip()
    low = t.lower()
    if low == schema.label_attack_token.strip().lower() or t == "1":
        return 1
    if low == schema.label_normal_token.strip().lower() or t == "0":
        return 0
    raise IngestError(f"line {lineno}: unknown label token {token!r}")


def _parse_float(token: str, column: str, lineno: int) -> float:
    try:
        value = float(token.strip())
    except ValueError:
        raise IngestError(f"line {lineno}: column {column!r}: cannot parse {token!r} as a number") from None
    if not math.isfinite(value):
        raise IngestError(f"line {lineno}: column {column!r}: non-finite value {token!r}")
    return value


def load_csv(path: Union[str, Path], schema: Optional[SchemaConfig] = None) -> Dataset:
    """Read a labelled process log into a ``Dataset``.

    Line numbers in errors count the header as line 1.
    """
    schema = schema or SchemaConfig()
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row expected") from None
        if schema.label_column not in header:
            raise IngestError(f"{path}: label column {schema.label_column!r} not in header")
        label_pos = header.index(schema.label_column)
        ts_pos = header.index(schema.timestamp_column) if schema.timestamp_column in header else None
        skip = {label_pos} | ({ts_pos} if ts_pos is not None else set())
        skip |= {header.index(c) for c in schema.drop_columns if c in header}
        feature_pos = [i for i in range(len(header)) if i not in skip]
        names = [header[i] for i in feature_pos]

        rows: list[list[float]] = []
        labels: list[int] = []
        stamps: list[str] = []
        for lineno, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise IngestError(
                    f"line {lineno}: expected {len(header)} fields, found {len(record)}")
            labels.append(_parse_label(record[label_pos], schema, lineno))
            rows.append([_parse_float(record[i], header[i], lineno) for i in feature_pos])
            if ts_pos is not None:
                stamps.append(record[ts_pos].strip())

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    kinds = infer_kinds(values, names, schema)
    return Dataset(features=FeatureMatrix(values, names, kinds),
                   labels=LabelIntervals.from_per_step(labels),
                   timestamps=tuple(stamps) if ts_pos is not None else None,
                   source=str(path))


def infer_kinds(values: np.ndarray, names: Sequence[str], schema: SchemaConfig) -> list[str]:
    """Boolean when every observed value is 0 or 1, unless the schema says otherwise."""
    kinds = []
    for j, name in enumerate(names):
        if name in schema.boolean_columns:
            kinds.append(BOOLEAN)
        elif name in schema.continuous_columns:
            kinds.append(CONTINUOUS)
        else:
            col = values[:, j]
            is_bool = col.size > 0 and bool(np.all((col == 0.0) | (col == 1.0)))
            kinds.append(BOOLEAN if is_bool else CONTINUOUS)
    return kinds


def split_train_test(ds: Dataset, boundary: int, normal_only: bool = False) -> tuple[Dataset, Dataset]:
    """Rows ``[0, boundary)`` and ``[boundary, n)``; optionally keep only label-0 training rows."""
    n = len(ds)
    if not isinstance(boundary, (int, np.integer)) or not 0 <= boundary <= n:
        raise InvalidArgument(f"split boundary {boundary!r} outside [0, {n}]")
    train = ds.rows(slice(0, int(boundary)))
    test = ds.rows(slice(int(boundary), n))
    if normal_only:
        train = train.rows(train.labels.per_step == 0)
    return train, test


def write_csv(ds: Dataset, path: Union[str, Path], schema: Optional[SchemaConfig] = None) -> None:
    """Write ``ds`` in the layout ``load_csv`` reads; floats use ``repr``."""
    schema = schema or SchemaConfig()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ([schema.timestamp_column] if ds.timestamps is not None else [])
        w.writerow(head + list(ds.features.names) + [schema.label_column])
        bool_cols = [k == BOOLEAN for k in ds.features.kinds]
        for i in range(len(ds)):
            row = ([ds.timestamps[i]] if ds.timestamps is not None else [])
            row += [str(int(v)) if b else repr(float(v))
                    for v, b in zip(ds.features.values[i], bool_cols)]
            row.append(schema.label_attack_token if ds.labels.per_step[i] else schema.label_normal_token)
            w.writerow(row)
