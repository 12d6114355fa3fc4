"""Survival datasets: CSV ingestion, the BMT layout, and train/test splitting."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import atomic_write

logger = logging.getLogger(__name__)

MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}


class DataError(ValueError):
    """Raised for malformed survival data files or invalid datasets."""


@dataclass(frozen=True)
class SurvivalRecord:
    time: float
    event: int
    covariates: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Immutable, column-oriented survival data.

    Stored as arrays (``times``, ``events``, ``X``); ``records`` gives the
    row view.
    """

    times: np.ndarray
    events: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        events_raw = np.array(self.events, dtype=float).reshape(-1)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(times), -1) if len(times) else X.reshape(0, 0)
        if X.ndim != 2 or X.shape[0] != times.size or events_raw.size != times.size:
            raise DataError("times, events and covariates must describe the same records")
        names = tuple(self.feature_names) or tuple(f"X{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} covariates")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise DataError("times must be finite and >= 0")
        if not np.all((events_raw == 0) | (events_raw == 1)):
            raise DataError("events must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates must be finite")
        events = events_raw.astype(np.int64)
        for arr in (times, events, X):
            arr.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], feature_names: Sequence[str]):
        p = len(feature_names)
        X = np.array([r.covariates for r in records], dtype=float).reshape(len(records), p)
        return cls(
            np.array([r.time for r in records], dtype=float),
            np.array([r.event for r in records], dtype=float),
            X,
            tuple(feature_names),
        )

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> SurvivalRecord:
        return SurvivalRecord(float(self.times[i]), int(self.events[i]), tuple(float(v) for v in self.X[i]))

    @cached_property
    def records(self) -> list[SurvivalRecord]:
        return [self[i] for i in range(len(self))]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def subset(self, indices) -> "SurvivalDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return SurvivalDataset(self.times[indices], self.events[indices], self.X[indices], self.feature_names)

    def with_covariates(self, X, feature_names) -> "SurvivalDataset":
        return SurvivalDataset(self.times, self.events, X, tuple(feature_names))

    def require_events(self):
        if self.n_events < 1:
            raise DataError("dataset contains no events (event = 1); cannot fit a model")


@dataclass(frozen=True)
class ColumnSchema:
    time_column: str
    event_column: str
    feature_columns: tuple[str, ...] = ()
    id_columns_ignored: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "id_columns_ignored", tuple(self.id_columns_ignored))
        if self.time_column == self.event_column:
            raise DataError("time and event columns must differ")
        if {self.time_column, self.event_column} & set(self.feature_columns):
            raise DataError("feature columns may not include the time or event column")
        if len(set(self.feature_columns)) != len(self.feature_columns):
            raise DataError("duplicate feature columns")


def _parse_number(text: str, column: str, row: int) -> float:
    if text.strip().lower() in MISSING_TOKENS:
        raise DataError(f"missing value in column {column!r} at row {row}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} in column {column!r} at row {row}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r} in column {column!r} at row {row}")
    return value


def _parse_time(text, column, row):
    value = _parse_number(text, column, row)
    if value < 0:
        raise DataError(f"negative time {text!r} at row {row}")
    return value


def _parse_event(text, column, row):
    value = _parse_number(text, column, row)
    if value not in (0.0, 1.0):
        raise DataError(f"event value outside {{0,1}} at row {row}: {text!r}")
    return int(value)


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        rows = [r for r in reader if r]
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: row {k} has {len(r)} fields, header has {len(header)}")
    return header, rows


def load_csv(path, schema: ColumnSchema) -> SurvivalDataset:
    """Read a header-first, comma-separated survival file.

    Row numbers in error messages count the header as row 1. With an empty
    ``schema.feature_columns`` every remaining column whose first data cell
    is numeric becomes a feature.
    """
    header, rows = _read_rows(path)
    col = {}
    for j, name in enumerate(header):
        # a repeated name refers to its first occurrence
        col.setdefault(name, j)
    for name in (schema.time_column, schema.event_column, *schema.feature_columns):
        if name not in col:
            raise DataError(f"{path}: missing column {name!r}")

    features = list(schema.feature_columns)
    if not features:
        skip = {schema.time_column, schema.event_column, *schema.id_columns_ignored}
        for name in col:
            if name in skip:
                continue
            if rows and not _is_number(rows[0][col[name]]):
                logger.warning("column %r is not numeric; ignored", name)
                continue
            features.append(name)

    times, events, X = [], [], []
    for k, row in enumerate(rows, start=2):
        times.append(_parse_time(row[col[schema.time_column]], schema.time_column, k))
        events.append(_parse_event(row[col[schema.event_column]], schema.event_column, k))
        X.append([_parse_number(row[col[f]], f, k) for f in features])
    return SurvivalDataset(
        np.array(times), np.array(events), np.array(X, dtype=float).reshape(len(rows), len(features)), tuple(features)
    )


def load_covariates(path, feature_names) -> np.ndarray:
    """Read just the named covariate columns, in the given order."""
    header, rows = _read_rows(path)
    missing = [n for n in feature_names if n not in header]
    if missing:
        found = [h for h in header if h in feature_names]
        raise DataError(
            f"dimension mismatch: expected p={len(feature_names)} features {list(feature_names)}, "
            f"found p={len(found)}; missing {missing}"
        )
    cols = [header.index(n) for n in feature_names]
    X = [[_parse_number(row[j], header[j], k) for j in cols] for k, row in enumerate(rows, start=2)]
    return np.array(X, dtype=float).reshape(len(rows), len(feature_names))


def write_csv(data: SurvivalDataset, path, time_column="time", event_column="event", comment_lines=()):
    """Write ``data`` so that :func:`load_csv` reads it back bit-for-bit."""
    buf = io.StringIO()
    for line in comment_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([time_column, event_column, *data.feature_names])
    for i in range(len(data)):
        writer.writerow([repr(float(data.times[i])), int(data.events[i]), *(repr(float(v)) for v in data.X[i])])
    atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# BMT (bone marrow transplant) layout

BMT_COLUMNS = (
    "ID", "c", "t", "ta", "a", "tc", "c", "tp", "p",
    "Z1", "Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8", "Z9", "Z10", "Group",
)
# endpoint name -> (time column index, event column index) in BMT_COLUMNS
BMT_ENDPOINTS = {
    "primary": (2, 1),
    "acute_gvhd": (3, 4),
    "chronic_gvhd": (5, 6),
    "platelet": (7, 8),
}
BMT_FEATURES = ("Z1", "Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8", "Z9", "Z10", "Group")
# reduced layout of the bundled file: primary endpoint and Group only
BMT_REDUCED_COLUMNS = ("ID", "t", "c", "Group")
BMT_GROUP_CODES = {"ALL": 1.0, "AML-Low Risk": 2.0, "AML-High Risk": 3.0}

BUNDLED_BMT = "bmt_dfs.csv"


def bundled_bmt_path() -> Path:
    return Path(str(resources.files("kirsf") / "resources" / BUNDLED_BMT))


def _group_code(text, row):
    if text.strip() in BMT_GROUP_CODES:
        return BMT_GROUP_CODES[text.strip()]
    return _parse_number(text, "Group", row)


def load_bmt(path=None, endpoint: str = "primary") -> SurvivalDataset:
    """Load bone-marrow-transplant data laid out as ID, c, t, ta, a, tc, c,
    tp, p, Z1..Z10, Group.

    ``endpoint`` selects the (time, indicator) pair. Covariates are Z1..Z10
    and Group (numeric codes 1-3); ID is dropped. A file with only the
    ID, t, c, Group columns is accepted for the ``primary`` endpoint and
    yields Group as the sole covariate.
    """
    if endpoint not in BMT_ENDPOINTS:
        raise DataError(f"unknown BMT endpoint {endpoint!r}; valid endpoints: {', '.join(BMT_ENDPOINTS)}")
    path = bundled_bmt_path() if path is None else Path(path)
    header, rows = _read_rows(path)

    if tuple(header) == BMT_COLUMNS:
        t_col, e_col = BMT_ENDPOINTS[endpoint]
        feature_cols = [BMT_COLUMNS.index(f) for f in BMT_FEATURES]
        names = BMT_FEATURES
    elif tuple(header) == BMT_REDUCED_COLUMNS:
        if endpoint != "primary":
            raise DataError(f"{path}: reduced BMT layout only carries the 'primary' endpoint")
        logger.warning("%s: reduced BMT layout without Z1..Z10; Group is the only covariate", path)
        t_col, e_col = 1, 2
        feature_cols = [3]
        names = ("Group",)
    else:
        raise DataError(
            f"{path}: malformed BMT layout; expected header {','.join(BMT_COLUMNS)} "
            f"(or {','.join(BMT_REDUCED_COLUMNS)}), got {','.join(header)}"
        )

    times, events, X = [], [], []
    for k, row in enumerate(rows, start=2):
        times.append(_parse_time(row[t_col], header[t_col], k))
        events.append(_parse_event(row[e_col], header[e_col], k))
        X.append([
            _group_code(row[j], k) if header[j] == "Group" else _parse_number(row[j], header[j], k)
            for j in feature_cols
        ])
    return SurvivalDataset(np.array(times), np.array(events), np.array(X, dtype=float), names)


# ---------------------------------------------------------------------------


def split_indices(data: SurvivalDataset, train_fraction: float, rng: np.random.Generator, max_retries: int = 100):
    """Random disjoint train/test index arrays with ``round(train_fraction * n)``
    training records, redrawn until the training part has an event.

    Both arrays are sorted, so each part keeps the original record order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(data)
    n_train = int(math.floor(train_fraction * n + 0.5))
    if not 0 < n_train < n:
        raise ValueError(f"train_fraction={train_fraction} leaves an empty part for n={n}")
    for _ in range(max_retries):
        perm = rng.permutation(n)
        train_idx = np.sort(perm[:n_train])
        if data.events[train_idx].any():
            return train_idx, np.sort(perm[n_train:])
    raise DataError(f"no split with an event in the training set after {max_retries} attempts")


def split_train_test(data: SurvivalDataset, train_fraction: float, rng: np.random.Generator, max_retries: int = 100):
    train_idx, test_idx = split_indices(data, train_fraction, rng, max_retries)
    return data.subset(train_idx), data.subset(test_idx)
