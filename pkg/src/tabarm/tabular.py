"""Dataset ingestion, z-score discretization, one-hot encoding and transactions.

Everything here is an immutable value type plus pure functions over them, so
instances can be shared freely across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CsvParseError, EmptyDatasetError


class Item(NamedTuple):
    """A (column, category) pair; the unit of transactions and rules."""

    column: str
    value: str


@dataclass(frozen=True)
class Dataset:
    """Categorical table: named columns, per-column category lists, rows.

    Category lists are ordered (first appearance for parsed data) and every
    row value must be a member of its column's list.
    """

    columns: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if len(self.categories) != len(self.columns):
            raise ValueError("categories must be given per column")
        cat_sets = []
        for col, cats in zip(self.columns, self.categories):
            if len(set(cats)) != len(cats):
                raise ValueError(f"duplicate categories in column {col!r}")
            cat_sets.append(set(cats))
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} values, expected {width}")
            for value, col, cats in zip(row, self.columns, cat_sets):
                if value not in cats:
                    raise ValueError(f"row {i}: {value!r} not a category of column {col!r}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def slice_columns(self, count: int) -> "Dataset":
        """Dataset restricted to the first `count` columns (row order kept)."""
        if not 1 <= count <= len(self.columns):
            raise ValueError(f"column count {count} out of range")
        return Dataset(
            columns=self.columns[:count],
            categories=self.categories[:count],
            rows=tuple(row[:count] for row in self.rows),
        )


@dataclass(frozen=True)
class OneHotSchema:
    """Feature layout of a one-hot encoding: contiguous span per column."""

    columns: tuple[str, ...]
    items: tuple[Item, ...]
    feature_index: dict[Item, int]
    column_spans: tuple[tuple[int, int], ...]
    total_features: int

    def __post_init__(self) -> None:
        pos = 0
        for (start, stop), col in zip(self.column_spans, self.columns):
            if start != pos or stop <= start:
                raise ValueError(f"span of column {col!r} is not contiguous")
            pos = stop
        if pos != self.total_features or len(self.items) != self.total_features:
            raise ValueError("spans must cover [0, total_features)")

    def span_of(self, column: str) -> tuple[int, int]:
        return self.column_spans[self.columns.index(column)]

    def column_of_feature(self, feature: int) -> str:
        return self.items[feature].column


@dataclass(frozen=True)
class OneHotMatrix:
    """n x d' {0,1} matrix with exactly one 1 inside every column span."""

    values: np.ndarray
    schema: OneHotSchema

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[1] != self.schema.total_features:
            raise ValueError("matrix shape does not match schema")
        if v.size and not np.isin(v, (0.0, 1.0)).all():
            raise ValueError("matrix entries must be 0 or 1")
        for start, stop in self.schema.column_spans:
            if v.size and not (v[:, start:stop].sum(axis=1) == 1.0).all():
                raise ValueError(f"span [{start},{stop}) must have exactly one 1 per row")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TransactionDB:
    """Ordered item universe plus per-row item-id sets."""

    items: tuple[Item, ...]
    transactions: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        n_items = len(self.items)
        for i, txn in enumerate(self.transactions):
            cols = [self.items[item_id].column for item_id in txn]
            if any(item_id >= n_items for item_id in txn):
                raise ValueError(f"transaction {i} references an unknown item id")
            if len(cols) != len(set(cols)):
                raise ValueError(f"transaction {i} holds two items of one column")

    @property
    def n_transactions(self) -> int:
        return len(self.transactions)

    def item_id(self, item: Item) -> int | None:
        try:
            return self.items.index(item)
        except ValueError:
            return None


def load_csv(path: str) -> Dataset:
    """Parse a categorical CSV (UTF-8, header row) into a Dataset.

    Categories are collected per column in first-appearance order; row order
    is preserved. Ragged rows raise CsvParseError with the 1-based body row
    index; a header-only file raises EmptyDatasetError.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: missing header row") from None
        if len(set(header)) != len(header):
            raise CsvParseError(f"{path}: duplicate column names in header")
        rows = []
        for i, raw in enumerate(reader, start=1):
            if len(raw) != len(header):
                raise CsvParseError(
                    f"{path}: row {i} has {len(raw)} fields, expected {len(header)}"
                )
            rows.append(tuple(raw))
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    categories: list[list[str]] = [[] for _ in header]
    seen: list[set[str]] = [set() for _ in header]
    for row in rows:
        for j, value in enumerate(row):
            if value not in seen[j]:
                seen[j].add(value)
                categories[j].append(value)
    return Dataset(
        columns=tuple(header),
        categories=tuple(tuple(c) for c in categories),
        rows=tuple(rows),
    )


def load_numeric_csv(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    """Parse a numeric CSV (same shape rules as load_csv) into (columns, n x d array)."""
    ds = load_csv(path)
    values = np.empty((ds.n_rows, ds.n_columns), dtype=np.float64)
    for i, row in enumerate(ds.rows):
        for j, text in enumerate(row):
            try:
                values[i, j] = float(text)
            except ValueError:
                raise CsvParseError(
                    f"{path}: row {i + 1}, column {ds.columns[j]!r}: "
                    f"not a decimal value: {text!r}"
                ) from None
    return ds.columns, values


ZSCORE_LABELS = ("low", "medium", "high")


def zscore_discretize(
    table: np.ndarray,
    columns: Sequence[str] | None = None,
    cutoff: float = 1.0,
) -> Dataset:
    """Bin each numeric column into low/medium/high by z-score.

    Uses the population standard deviation; boundaries are inclusive, so a
    value with (v - mean)/std == cutoff is labeled "high". Zero-variance
    columns are entirely "medium".
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 1:
        raise ValueError("table must be a 2-D matrix with at least one row")
    n, d = table.shape
    names = tuple(columns) if columns is not None else tuple(f"c{j}" for j in range(d))
    if len(names) != d:
        raise ValueError(f"{len(names)} column names for {d} columns")
    if not np.isfinite(table).all():
        i, j = np.argwhere(~np.isfinite(table))[0]
        raise ValueError(f"non-finite value at row {i}, column {names[j]!r}")

    mean = table.mean(axis=0)
    std = table.std(axis=0)  # population (ddof=0)
    labels = np.full((n, d), "medium", dtype=object)
    nz = std > 0.0
    z = np.zeros_like(table)
    z[:, nz] = (table[:, nz] - mean[nz]) / std[nz]
    labels[(z >= cutoff) & nz] = "high"
    labels[(z <= -cutoff) & nz] = "low"

    categories = []
    for j in range(d):
        order: list[str] = []
        for lab in labels[:, j]:
            if lab not in order:
                order.append(lab)
        categories.append(tuple(order))
    rows = tuple(tuple(labels[i, :]) for i in range(n))
    return Dataset(columns=names, categories=tuple(categories), rows=rows)


def build_schema(ds: Dataset) -> OneHotSchema:
    """One-hot feature layout for a dataset: column order, then category order."""
    items: list[Item] = []
    feature_index: dict[Item, int] = {}
    spans: list[tuple[int, int]] = []
    pos = 0
    for col, cats in zip(ds.columns, ds.categories):
        start = pos
        for cat in cats:
            item = Item(col, cat)
            feature_index[item] = pos
            items.append(item)
            pos += 1
        spans.append((start, pos))
    return OneHotSchema(
        columns=ds.columns,
        items=tuple(items),
        feature_index=feature_index,
        column_spans=tuple(spans),
        total_features=pos,
    )


def one_hot_encode(ds: Dataset) -> tuple[OneHotSchema, OneHotMatrix]:
    """Encode each row as a {0,1} vector with one 1 per column span."""
    if ds.n_rows == 0 or ds.n_columns == 0:
        raise EmptyDatasetError("cannot one-hot encode an empty dataset")
    schema = build_schema(ds)
    values = np.zeros((ds.n_rows, schema.total_features), dtype=np.float64)
    for i, row in enumerate(ds.rows):
        for col, value in zip(ds.columns, row):
            values[i, schema.feature_index[Item(col, value)]] = 1.0
    return schema, OneHotMatrix(values=values, schema=schema)


def to_transactions(m: OneHotMatrix) -> TransactionDB:
    """Transaction i holds exactly the items set to 1 in row i."""
    transactions = tuple(
        frozenset(int(j) for j in np.nonzero(m.values[i] == 1.0)[0])
        for i in range(m.n_rows)
    )
    return TransactionDB(items=m.schema.items, transactions=transactions)


def dataset_to_transactions(ds: Dataset) -> tuple[OneHotSchema, TransactionDB]:
    """Convenience composition of one_hot_encode and to_transactions."""
    schema, matrix = one_hot_encode(ds)
    return schema, to_transactions(matrix)


def write_csv(ds: Dataset, path: str) -> None:
    """Write a Dataset back out as a header + rows CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.columns)
        writer.writerows(ds.rows)
