"""Typed tabular data: schema, CSV ingestion, splitting, and feature encodings.

A Table is an immutable collection of typed columns (numerical or
categorical) plus stable integer row ids used for split bookkeeping.
Encoders fitted here (standardization + one-hot, quantile normalization,
PCA) are the shared preprocessing for every metric in the package.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import ndtr, ndtri

NUMERICAL = "numerical"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    """Schema file or schema/data mismatch problems."""


class DataError(ValueError):
    """Cell-level ingestion problems: unparseable, missing, out of vocabulary."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.kind not in (NUMERICAL, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            if self.kind != CATEGORICAL:
                raise SchemaError(f"column {self.name!r}: categories only allowed on categorical columns")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate declared categories")


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("schema must declare at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    @classmethod
    def from_dict(cls, spec: dict) -> "Schema":
        if not isinstance(spec, dict) or "columns" not in spec:
            raise SchemaError("schema JSON must be an object with a 'columns' list")
        cols = []
        for entry in spec["columns"]:
            cats = entry.get("categories")
            cols.append(Column(
                name=entry.get("name", ""),
                kind=entry.get("kind", ""),
                categories=tuple(cats) if cats is not None else None,
            ))
        return cls(tuple(cols))

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid schema JSON in {path}: {exc}") from exc
        return cls.from_dict(spec)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry: dict = {"name": c.name, "kind": c.kind}
            if c.categories is not None:
                entry["categories"] = list(c.categories)
            cols.append(entry)
        return {"columns": cols}


@dataclass(frozen=True)
class Table:
    """Immutable typed table. `cells` holds one array per schema column."""

    schema: Schema
    cells: tuple[np.ndarray, ...]
    row_ids: np.ndarray

    def __post_init__(self):
        if len(self.cells) != len(self.schema.columns):
            raise DataError("cell column count does not match schema")
        n = len(self.row_ids)
        for col, arr in zip(self.schema.columns, self.cells):
            if len(arr) != n:
                raise DataError(f"column {col.name!r} length {len(arr)} != row count {n}")
            if col.kind == NUMERICAL and len(arr) and not np.all(np.isfinite(arr)):
                raise DataError(f"column {col.name!r} contains non-finite values")
        if len(np.unique(self.row_ids)) != n:
            raise DataError("row_ids must be unique")
        for arr in self.cells + (self.row_ids,):
            arr.setflags(write=False)

    @classmethod
    def from_rows(cls, schema: Schema, rows, row_ids=None) -> "Table":
        rows = list(rows)
        n = len(rows)
        cols = []
        for j, col in enumerate(schema.columns):
            if col.kind == NUMERICAL:
                cols.append(np.array([float(r[j]) for r in rows], dtype=np.float64))
            else:
                cols.append(np.array([str(r[j]) for r in rows], dtype=object))
        if row_ids is None:
            row_ids = np.arange(n, dtype=np.int64)
        return cls(schema, tuple(cols), np.asarray(row_ids, dtype=np.int64))

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    def column(self, name: str) -> np.ndarray:
        return self.cells[self.schema.index(name)]

    def row(self, i: int) -> tuple:
        return tuple(arr[i] for arr in self.cells)

    def to_rows(self) -> list[tuple]:
        return [self.row(i) for i in range(self.n_rows)]

    def row_key(self, i: int) -> tuple:
        # hashable identity by cell values, used for overlap counting
        return tuple(float(v) if isinstance(v, (float, np.floating)) else str(v)
                     for v in self.row(i))

    def take(self, indices) -> "Table":
        idx = np.asarray(indices, dtype=np.int64)
        return Table(self.schema, tuple(arr[idx] for arr in self.cells), self.row_ids[idx])

    def with_row_ids(self, row_ids) -> "Table":
        return Table(self.schema, tuple(np.array(a) for a in self.cells),
                     np.asarray(row_ids, dtype=np.int64))

    def select_columns(self, names) -> "Table":
        cols = tuple(self.schema.column(n) for n in names)
        cells = tuple(self.cells[self.schema.index(n)] for n in names)
        return Table(Schema(cols), cells, np.array(self.row_ids))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.schema.names)
            kinds = [c.kind for c in self.schema.columns]
            for i in range(self.n_rows):
                writer.writerow([
                    repr(float(v)) if kind == NUMERICAL else str(v)
                    for kind, v in zip(kinds, self.row(i))
                ])


def concat_tables(tables) -> Table:
    """Stack tables with one shared schema; output gets fresh row ids."""
    tables = list(tables)
    if not tables:
        raise DataError("cannot concatenate zero tables")
    schema = tables[0].schema
    for t in tables[1:]:
        if t.schema != schema:
            raise SchemaError("cannot concatenate tables with different schemas")
    cells = tuple(np.concatenate([t.cells[j] for t in tables])
                  for j in range(len(schema.columns)))
    total = sum(t.n_rows for t in tables)
    return Table(schema, cells, np.arange(total, dtype=np.int64))


def load_table(csv_path, schema_path) -> Table:
    """Read a CSV against its schema JSON.

    The header row must match the schema column names in order. Numerical
    cells must parse as finite decimal reals; every cell must be present;
    categorical cells must honor declared categories when the schema has
    them. Row ids are assigned 0..n-1 in file order.
    """
    schema = Schema.from_json(schema_path)
    kinds = [c.kind for c in schema.columns]
    allowed = [set(c.categories) if c.categories is not None else None
               for c in schema.columns]
    num_cols: list[list[float]] = [[] for _ in schema.columns]
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{csv_path}: empty file, expected a header row") from None
        if tuple(header) != schema.names:
            raise SchemaError(
                f"{csv_path}: header {header!r} does not match schema columns {list(schema.names)!r}")
        cat_cols: list[list[str]] = [[] for _ in schema.columns]
        for rownum, row in enumerate(reader):
            if len(row) != len(schema.columns):
                raise DataError(
                    f"{csv_path}: row {rownum} has {len(row)} cells, expected {len(schema.columns)}")
            for j, token in enumerate(row):
                name = schema.columns[j].name
                if token == "":
                    raise DataError(f"{csv_path}: missing value at row {rownum}, column {name!r}")
                if kinds[j] == NUMERICAL:
                    try:
                        value = float(token)
                    except ValueError:
                        raise DataError(
                            f"{csv_path}: unparseable numerical cell {token!r} "
                            f"at row {rownum}, column {name!r}") from None
                    if not math.isfinite(value):
                        raise DataError(
                            f"{csv_path}: non-finite value {token!r} at row {rownum}, column {name!r}")
                    num_cols[j].append(value)
                else:
                    if allowed[j] is not None and token not in allowed[j]:
                        raise DataError(
                            f"{csv_path}: value {token!r} at row {rownum} is not among the "
                            f"declared categories of column {name!r}")
                    cat_cols[j].append(token)
    cells = []
    for j, kind in enumerate(kinds):
        if kind == NUMERICAL:
            cells.append(np.array(num_cols[j], dtype=np.float64))
        else:
            cells.append(np.array(cat_cols[j], dtype=object))
    n = len(cells[0]) if cells else 0
    return Table(schema, tuple(cells), np.arange(n, dtype=np.int64))


@dataclass(frozen=True)
class RemiaSplit:
    """Disjoint partition of a table into two target sets and a shared rest.

    x1 and x2 are the derived training sets: each target set unioned with
    the shared rows r, so |x1| = |x2| and they overlap exactly on r.
    """

    t1: Table
    t2: Table
    r: Table
    x1: Table
    x2: Table
    f: float


def split_remia(d: Table, f: float, seed: int) -> RemiaSplit:
    """Seeded uniform split of d into (t1, t2, r) with |t1| = |t2| = floor(f/(1+f)*n).

    The remainder r takes every row not assigned to a target set. The
    partition depends only on (row count, f, seed).
    """
    if not (0 < f <= 1):
        raise ValueError(f"target fraction must lie in (0, 1], got {f}")
    n = d.n_rows
    if n < 4:
        raise ValueError(f"dataset too small to split: {n} rows")
    # exact rational arithmetic so e.g. 1500 * (0.5/1.5) floors to 500, not 499
    frac = Fraction(str(f))
    t = int(frac * n / (1 + frac))
    if t < 1:
        raise ValueError(f"dataset too small for target fraction {f}: {n} rows")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    idx_t1 = perm[:t]
    idx_t2 = perm[t:2 * t]
    idx_r = perm[2 * t:]
    t1, t2, r = d.take(idx_t1), d.take(idx_t2), d.take(idx_r)
    x1 = d.take(np.concatenate([idx_t1, idx_r]))
    x2 = d.take(np.concatenate([idx_t2, idx_r]))
    return RemiaSplit(t1=t1, t2=t2, r=r, x1=x1, x2=x2, f=f)


@dataclass(frozen=True)
class EncoderState:
    """Per-column statistics for standardization + one-hot encoding."""

    schema: Schema
    means: dict
    stds: dict
    vocabularies: dict
    feature_dim: int


def fit_encoder(reference: Table) -> EncoderState:
    """Fit standardization and one-hot vocabularies on a reference table.

    Numerical columns store (mean, population std); a constant column
    stores std 1 so encoding stays defined. Categorical vocabularies use
    the declared category order when present, extended by any other
    observed value in first-appearance order.
    """
    if reference.n_rows == 0:
        raise DataError("cannot fit an encoder on an empty table")
    means, stds, vocabularies = {}, {}, {}
    dim = 0
    for col in reference.schema.columns:
        values = reference.column(col.name)
        if col.kind == NUMERICAL:
            mean = float(np.mean(values))
            std = float(np.std(values))
            means[col.name] = mean
            stds[col.name] = std if std > 0 else 1.0
            dim += 1
        else:
            vocab = list(col.categories) if col.categories is not None else []
            seen = set(vocab)
            for v in values:
                if v not in seen:
                    seen.add(v)
                    vocab.append(v)
            vocabularies[col.name] = tuple(vocab)
            dim += len(vocab)
    return EncoderState(reference.schema, means, stds, vocabularies, dim)


def encode(t: Table, enc: EncoderState) -> np.ndarray:
    """Encode a table into a float matrix: standardized numericals and
    one-hot categorical blocks in schema order. Values outside a fitted
    vocabulary encode as an all-zero block."""
    if t.schema != enc.schema:
        raise SchemaError("table schema does not match the fitted encoder")
    n = t.n_rows
    out = np.zeros((n, enc.feature_dim), dtype=np.float64)
    offset = 0
    for col in enc.schema.columns:
        values = t.column(col.name)
        if col.kind == NUMERICAL:
            out[:, offset] = (values - enc.means[col.name]) / enc.stds[col.name]
            offset += 1
        else:
            vocab = enc.vocabularies[col.name]
            index = {v: i for i, v in enumerate(vocab)}
            for i, v in enumerate(values):
                j = index.get(v)
                if j is not None:
                    out[i, offset + j] = 1.0
            offset += len(vocab)
    return out


@dataclass(frozen=True)
class QuantileMap:
    """Monotone map between one column's empirical distribution and N(0,1).

    Forward sends a value to the standard-normal quantile of its empirical
    mid-quantile (rank - 0.5)/n, with tied values sharing their average
    rank. Inverse interpolates linearly between the sorted reference
    values, clamping quantiles into [eps, 1-eps] with eps = 1/(2n).
    """

    values: np.ndarray      # unique sorted reference values
    quantiles: np.ndarray   # strictly increasing mid-quantiles per unique value
    eps: float

    def forward(self, x) -> np.ndarray:
        q = np.interp(np.asarray(x, dtype=np.float64), self.values, self.quantiles)
        return ndtri(np.clip(q, self.eps, 1.0 - self.eps))

    def inverse(self, z) -> np.ndarray:
        u = ndtr(np.asarray(z, dtype=np.float64))
        return np.interp(np.clip(u, self.eps, 1.0 - self.eps), self.quantiles, self.values)


def fit_quantile_map(column_values) -> QuantileMap:
    values = np.asarray(column_values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ValueError(f"need at least 2 values to fit a quantile map, got {n}")
    if not np.all(np.isfinite(values)):
        raise ValueError("quantile map input must be finite")
    uniq, counts = np.unique(values, return_counts=True)
    ends = np.cumsum(counts)            # one-past-last 1-based rank per group
    starts = ends - counts
    mean_ranks = (starts + 1 + ends) / 2.0
    quantiles = (mean_ranks - 0.5) / n
    return QuantileMap(uniq, quantiles, eps=1.0 / (2 * n))


@dataclass(frozen=True)
class PcaState:
    mean: np.ndarray
    components: np.ndarray   # (k, dim), orthonormal rows
    explained: np.ndarray    # (k,) eigenvalues, non-increasing


# relative eigenvalue cutoff below which a direction counts as numerically null
PCA_EIGENVALUE_FLOOR = 1e-10


def pca_fit(x: np.ndarray, variance_keep: float = 1.0) -> PcaState:
    """Principal components of the centered covariance (population normalization).

    Keeps the smallest leading set of components whose cumulative explained
    variance reaches variance_keep, after dropping directions with
    eigenvalue <= 1e-10 times the largest.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("pca_fit expects a non-empty 2-D matrix")
    if not (0 < variance_keep <= 1):
        raise ValueError(f"variance_keep must lie in (0, 1], got {variance_keep}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order].T        # rows are components
    largest = eigvals[0] if len(eigvals) else 0.0
    kept = eigvals > PCA_EIGENVALUE_FLOOR * largest
    n_floor = int(np.sum(kept))
    total = float(eigvals.sum())
    if total > 0:
        ratios = np.cumsum(eigvals) / total
        k_var = int(np.searchsorted(ratios, variance_keep - 1e-12) + 1)
    else:
        k_var = 0
    k = min(n_floor, max(k_var, 0))
    components = eigvecs[:k]
    # canonical sign: largest-magnitude entry of each component is positive
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaState(mean=mean, components=components, explained=eigvals[:k])


def pca_transform(x: np.ndarray, state: PcaState) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.mean.shape[0]:
        raise ValueError("pca_transform input width does not match the fitted state")
    return (x - state.mean) @ state.components.T
