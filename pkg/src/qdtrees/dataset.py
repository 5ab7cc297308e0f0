"""Tabular ingestion, binarization and bitset covers.

A dataset goes through three stages:

    CSV file -> RawTable -> BinaryDataset

``RawTable`` keeps columns close to their file representation (numeric,
categorical or binary feature columns plus one numeric target).
``binarize`` turns every column into 0/1 features and permanently reindexes
the samples in ascending target order, so that any subset of samples taken
in index order is already sorted by target.  Covers are boolean masks over
this sorted indexing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"

_KINDS = (NUMERIC, CATEGORICAL, BINARY)


class DatasetError(ValueError):
    """Raised for malformed tables, schemas or feature references."""


@dataclass
class Column:
    name: str
    kind: str
    values: list

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DatasetError(f"unknown column kind {self.kind!r} for column {self.name!r}")


@dataclass
class RawTable:
    """Feature columns plus a numeric target column.

    ``target`` may be None for prediction-time tables that carry no labels;
    operations that need labels reject such tables.
    """

    columns: list[Column]
    target_name: str | None = None
    target: list[float] | None = None

    def __post_init__(self) -> None:
        n = self.n_rows
        if n == 0:
            raise DatasetError("table has no rows")
        for col in self.columns:
            if len(col.values) != n:
                raise DatasetError(
                    f"column {col.name!r} has {len(col.values)} rows, expected {n}"
                )
        if self.target is not None:
            for i, v in enumerate(self.target):
                if v is None or not np.isfinite(v):
                    raise DatasetError(f"target {self.target_name!r} missing or non-finite at row {i}")

    @property
    def n_rows(self) -> int:
        if self.target is not None:
            return len(self.target)
        if self.columns:
            return len(self.columns[0].values)
        return 0

    def require_target(self) -> list[float]:
        if self.target is None:
            raise DatasetError("table has no target column")
        return self.target


@dataclass
class TableSchema:
    """How to interpret a CSV: which column is the target, optional kind overrides."""

    target: str | None = None
    types: dict[str, str] = field(default_factory=dict)
    target_required: bool = True


@dataclass
class BinarizeConfig:
    bins: int = 4
    max_categories: int = 64

    def __post_init__(self) -> None:
        if self.bins < 1:
            raise DatasetError(f"bins must be >= 1, got {self.bins}")
        if self.max_categories < 1:
            raise DatasetError(f"max_categories must be >= 1, got {self.max_categories}")


@dataclass(frozen=True)
class Itemset:
    """Canonical sorted set of signed feature literals.

    A literal is ``(feature, positive)``.  Canonical form sorts by
    (feature, polarity) with negative before positive, and forbids a feature
    from appearing twice in either polarity, so that the same node of the
    search space always hashes to the same key regardless of discovery order.
    """

    literals: tuple[tuple[int, bool], ...] = ()

    def __post_init__(self) -> None:
        feats = [f for f, _ in self.literals]
        if sorted(self.literals) != list(self.literals):
            raise DatasetError(f"itemset literals not in canonical order: {self.literals}")
        if len(set(feats)) != len(feats):
            raise DatasetError(f"itemset repeats a feature: {self.literals}")

    @classmethod
    def empty(cls) -> "Itemset":
        return cls(())

    @classmethod
    def of(cls, *literals: tuple[int, bool]) -> "Itemset":
        return cls(tuple(sorted(literals)))

    def extended(self, feature: int, positive: bool) -> "Itemset":
        return Itemset(tuple(sorted(self.literals + ((feature, bool(positive)),))))

    def features(self) -> frozenset[int]:
        return frozenset(f for f, _ in self.literals)

    def __len__(self) -> int:
        return len(self.literals)


class BinaryDataset:
    """Binarized samples, target-sorted, with per-feature cover masks.

    ``covers[f]`` is a boolean mask over sample indices marking the samples
    where feature ``f`` is 1.  Targets are sorted ascending at construction,
    so iterating any cover in index order visits samples in ascending target
    order.  Instances are immutable after construction.
    """

    def __init__(
        self,
        covers: np.ndarray,
        targets: np.ndarray,
        original_index: np.ndarray,
        feature_map: list[dict] | None = None,
    ) -> None:
        covers = np.ascontiguousarray(covers, dtype=bool)
        targets = np.asarray(targets, dtype=np.float64)
        original_index = np.asarray(original_index, dtype=np.intp)
        if covers.ndim != 2:
            raise DatasetError("covers must be a 2-D (n_features, n_samples) array")
        n_features, n_samples = covers.shape
        if n_samples == 0:
            raise DatasetError("dataset has no samples")
        if targets.shape != (n_samples,):
            raise DatasetError("targets length does not match covers")
        if np.any(np.diff(targets) < 0):
            raise DatasetError("targets must be nondecreasing")
        if sorted(original_index.tolist()) != list(range(n_samples)):
            raise DatasetError("original_index is not a permutation")
        self.covers = covers
        self.targets = targets
        self.original_index = original_index
        self.feature_map = feature_map if feature_map is not None else _default_feature_map(n_features)
        if len(self.feature_map) != n_features:
            raise DatasetError("feature_map length does not match covers")
        for arr in (self.covers, self.targets, self.original_index):
            arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return self.covers.shape[1]

    @property
    def n_features(self) -> int:
        return self.covers.shape[0]

    @property
    def feature_names(self) -> list[str]:
        return [_feature_label(e) for e in self.feature_map]

    @classmethod
    def from_arrays(
        cls,
        features: np.ndarray,
        targets,
        feature_map: list[dict] | None = None,
    ) -> "BinaryDataset":
        """Build a dataset from an (n_samples, n_features) 0/1 matrix and targets."""
        x = np.asarray(features)
        y = np.asarray(targets, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DatasetError("features must be (n_samples, n_features) matching targets")
        order = np.argsort(y, kind="stable")  # stable: ties keep original row order
        return cls(x[order].T.astype(bool), y[order], order, feature_map)


def _default_feature_map(n_features: int) -> list[dict]:
    return [
        {"feature": k, "source_column": f"f{k}", "kind": "passthrough"}
        for k in range(n_features)
    ]


def _feature_label(entry: dict) -> str:
    col = entry["source_column"]
    if entry["kind"] == "le_threshold":
        return f"{col}<={entry['threshold']:g}"
    if entry["kind"] == "one_hot":
        return f"{col}={entry['value']}"
    return col


def binarize(raw: RawTable, config: BinarizeConfig | None = None) -> BinaryDataset:
    """Turn a RawTable into a target-sorted BinaryDataset.

    Categorical columns become one one-hot feature per distinct value
    (values in sorted order).  Numeric columns become ``bins`` features of
    the form "value <= t" with thresholds at equi-frequency quantiles
    j/(bins+1); duplicate thresholds are dropped, so a column may yield
    fewer features than requested.  Binary columns pass through unchanged.
    """
    config = config or BinarizeConfig()
    y = np.asarray(raw.require_target(), dtype=np.float64)
    n = len(y)
    columns: list[np.ndarray] = []
    feature_map: list[dict] = []
    for col in raw.columns:
        if col.kind == BINARY:
            vals = np.asarray(col.values, dtype=np.float64)
            if not np.all(np.isin(vals, (0.0, 1.0))):
                raise DatasetError(f"binary column {col.name!r} has values outside {{0,1}}")
            columns.append(vals == 1.0)
            feature_map.append({"source_column": col.name, "kind": "passthrough"})
        elif col.kind == CATEGORICAL:
            values = [str(v) for v in col.values]
            cats = sorted(set(values))
            if len(cats) > config.max_categories:
                raise DatasetError(
                    f"categorical column {col.name!r} has {len(cats)} distinct values,"
                    f" more than max_categories={config.max_categories}"
                )
            arr = np.asarray(values, dtype=object)
            for cat in cats:
                columns.append(arr == cat)
                feature_map.append({"source_column": col.name, "kind": "one_hot", "value": cat})
        elif col.kind == NUMERIC:
            vals = np.asarray(col.values, dtype=np.float64)
            levels = [j / (config.bins + 1) for j in range(1, config.bins + 1)]
            thresholds = np.unique(np.quantile(vals, levels))
            for t in thresholds:
                columns.append(vals <= t)
                feature_map.append(
                    {"source_column": col.name, "kind": "le_threshold", "threshold": float(t)}
                )
        else:  # pragma: no cover - Column validates kinds
            raise DatasetError(f"unknown column kind {col.kind!r}")
    for k, entry in enumerate(feature_map):
        entry_ordered = {"feature": k, **entry}
        feature_map[k] = entry_ordered
    if columns:
        x = np.column_stack(columns)
    else:
        x = np.zeros((n, 0), dtype=bool)
    return BinaryDataset.from_arrays(x, y, feature_map)


def apply_binarization(feature_map: list[dict], raw: RawTable) -> np.ndarray:
    """Map a RawTable onto an existing binarization, e.g. at prediction time.

    Returns an (n_rows, n_features) boolean matrix in the table's row order.
    """
    by_name = {c.name: c for c in raw.columns}
    n = raw.n_rows
    out = np.zeros((n, len(feature_map)), dtype=bool)
    for entry in feature_map:
        name = entry["source_column"]
        if name not in by_name:
            raise DatasetError(f"column {name!r} required by the binarization map is missing")
        col = by_name[name]
        k = entry["feature"]
        if entry["kind"] == "le_threshold":
            vals = np.asarray([float(v) for v in col.values], dtype=np.float64)
            out[:, k] = vals <= entry["threshold"]
        elif entry["kind"] == "one_hot":
            out[:, k] = np.asarray([str(v) for v in col.values], dtype=object) == entry["value"]
        elif entry["kind"] == "passthrough":
            vals = np.asarray([float(v) for v in col.values], dtype=np.float64)
            out[:, k] = vals == 1.0
        else:
            raise DatasetError(f"unknown binarization kind {entry['kind']!r}")
    return out


def cover(ds: BinaryDataset, items: Itemset) -> np.ndarray:
    """Boolean mask of the samples consistent with every literal of ``items``.

    The empty itemset covers everything.  Set bits visited in ascending index
    order are in ascending target order by dataset construction.
    """
    mask = np.ones(ds.n_samples, dtype=bool)
    for feature, positive in items.literals:
        if not 0 <= feature < ds.n_features:
            raise DatasetError(f"feature id {feature} out of range")
        if positive:
            mask &= ds.covers[feature]
        else:
            mask &= ~ds.covers[feature]
    return mask


def _infer_kind(values: list[str]) -> str:
    parsed = []
    for v in values:
        try:
            parsed.append(float(v))
        except (TypeError, ValueError):
            return CATEGORICAL
    if all(p in (0.0, 1.0) for p in parsed):
        return BINARY
    return NUMERIC


def _parse_column(name: str, kind: str, values: list[str]) -> Column:
    if kind == CATEGORICAL:
        return Column(name, kind, list(values))
    parsed = []
    for i, v in enumerate(values):
        try:
            parsed.append(float(v))
        except (TypeError, ValueError):
            raise DatasetError(f"column {name!r} has non-numeric value {v!r} at row {i}") from None
    if kind == BINARY:
        if any(p not in (0.0, 1.0) for p in parsed):
            raise DatasetError(f"column {name!r} declared binary but has values outside {{0,1}}")
        return Column(name, kind, [int(p) for p in parsed])
    return Column(name, kind, parsed)


def load_csv(path, schema: TableSchema) -> RawTable:
    """Load a headered CSV into a RawTable.

    Column kinds default to inference (numeric when every value parses as a
    float, binary when additionally all values are 0/1, categorical
    otherwise); ``schema.types`` overrides per column.  The target column is
    required unless ``schema.target_required`` is off.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: row {i} has {len(row)} fields, header has {len(header)}"
                )
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    raw_cols = {name: [row[j] for row in rows] for j, name in enumerate(header)}

    target_name = schema.target
    target: list[float] | None = None
    if target_name is not None:
        if target_name not in raw_cols:
            if schema.target_required:
                raise DatasetError(f"{path}: target column {target_name!r} not found")
            target_name = None
        else:
            target = []
            for i, v in enumerate(raw_cols[target_name]):
                try:
                    target.append(float(v))
                except (TypeError, ValueError):
                    raise DatasetError(
                        f"{path}: target {target_name!r} has non-numeric value {v!r} at row {i}"
                    ) from None

    columns = []
    for name in header:
        if name == target_name:
            continue
        values = raw_cols[name]
        kind = schema.types.get(name) or _infer_kind(values)
        if kind not in _KINDS:
            raise DatasetError(f"schema declares unknown kind {kind!r} for column {name!r}")
        columns.append(_parse_column(name, kind, values))
    return RawTable(columns, target_name, target)


def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest round-trip representation
    return str(v)


def save_csv(table: RawTable, path) -> None:
    """Write a RawTable back to CSV; load_csv of the result yields an equal table."""
    path = Path(path)
    header = [c.name for c in table.columns]
    if table.target is not None:
        header.append(table.target_name)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(table.n_rows):
            row = [_format_cell(c.values[i]) for c in table.columns]
            if table.target is not None:
                row.append(_format_cell(table.target[i]))
            writer.writerow(row)
