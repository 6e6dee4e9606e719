"""Column-oriented table, CSV ingestion and per-column moment statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ColumnLookupError,
    DataError,
    InsufficientDataError,
    KindError,
    ParseError,
    SchemaError,
    UndefinedMomentsError,
)


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    IDENTIFIER = "identifier"


class Role(str, Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    IDENTIFIER = "identifier"


@dataclass(frozen=True)
class SchemaEntry:
    name: str
    kind: ColumnKind
    role: Role

    @classmethod
    def of(cls, name: str, kind: str | ColumnKind, role: str | Role) -> SchemaEntry:
        try:
            return cls(name, ColumnKind(kind), Role(role))
        except ValueError as exc:
            raise SchemaError(f"bad schema entry for {name!r}: {exc}") from None


Schema = Sequence[SchemaEntry]


@dataclass(frozen=True, eq=False)
class Column:
    """One named column.

    Numeric columns hold a read-only float64 array where NaN marks a missing
    cell and nothing else; present cells are always finite. Categorical and
    identifier columns hold an object array of ``str`` or ``None``.
    """

    name: str
    kind: ColumnKind
    role: Role
    values: np.ndarray

    def __post_init__(self):
        if self.kind is ColumnKind.NUMERIC:
            arr = np.array(self.values, dtype=np.float64)
            if np.isinf(arr).any():
                raise ParseError(f"non-finite value in numeric column {self.name!r}")
        else:
            arr = np.empty(len(self.values), dtype=object)
            arr[:] = [None if v is None else str(v) for v in self.values]
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def numeric(cls, name: str, values, role: Role = Role.INDEPENDENT) -> Column:
        cells = [np.nan if v is None else v for v in values]
        return cls(name, ColumnKind.NUMERIC, role, np.asarray(cells, dtype=np.float64))

    @classmethod
    def categorical(cls, name: str, values: Iterable[str | None], role: Role = Role.INDEPENDENT) -> Column:
        return cls(name, ColumnKind.CATEGORICAL, role, list(values))

    @classmethod
    def identifier(cls, name: str, values: Iterable[str | None]) -> Column:
        return cls(name, ColumnKind.IDENTIFIER, Role.IDENTIFIER, list(values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def present(self) -> np.ndarray:
        if self.kind is ColumnKind.NUMERIC:
            return ~np.isnan(self.values)
        return np.array([v is not None for v in self.values], dtype=bool)

    @property
    def count_present(self) -> int:
        return int(self.present.sum())

    def present_values(self) -> np.ndarray:
        return self.values[self.present]

    def cells(self) -> list:
        """Cells as python objects with ``None`` for missing."""
        if self.kind is ColumnKind.NUMERIC:
            return [None if math.isnan(v) else float(v) for v in self.values]
        return list(self.values)

    def take(self, rows) -> Column:
        return Column(self.name, self.kind, self.role, self.values[rows])

    def replace(self, values, kind: ColumnKind | None = None) -> Column:
        return Column(self.name, kind or self.kind, self.role, values)


@dataclass(frozen=True, eq=False)
class Table:
    columns: tuple[Column, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise SchemaError(f"columns have unequal lengths: {sorted(lengths)}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def row_count(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> Column:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise ColumnLookupError(f"unknown column {name!r}") from None

    def schema(self) -> list[SchemaEntry]:
        return [SchemaEntry(c.name, c.kind, c.role) for c in self.columns]

    def names_of(self, kind: ColumnKind | None = None, role: Role | None = None) -> list[str]:
        return [
            c.name
            for c in self.columns
            if (kind is None or c.kind is kind) and (role is None or c.role is role)
        ]

    def with_columns(self, replacements: Iterable[Column]) -> Table:
        """New table with same-named columns swapped in place."""
        by_name = {c.name: c for c in replacements}
        for name in by_name:
            self[name]
        return Table(tuple(by_name.get(c.name, c) for c in self.columns))

    def take(self, rows) -> Table:
        rows = np.asarray(rows)
        return Table(tuple(c.take(rows) for c in self.columns))

    def select(self, names: Sequence[str]) -> Table:
        return Table(tuple(self[n] for n in names))

    def numeric_matrix(self, names: Sequence[str]) -> np.ndarray:
        """``n x len(names)`` float matrix with NaN for missing cells."""
        cols = []
        for name in names:
            col = self[name]
            if col.kind is not ColumnKind.NUMERIC:
                raise KindError(f"column {name!r} is {col.kind.value}, expected numeric")
            cols.append(col.values)
        if not cols:
            return np.empty((self.row_count, 0))
        return np.column_stack(cols).astype(np.float64)


# ------------------------------------------------------------------ CSV I/O


def _open_input(path: str | Path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def load_schema(path: str | Path) -> list[SchemaEntry]:
    """Read a ``name,kind,role`` CSV schema file."""
    with _open_input(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["name", "kind", "role"]:
            raise SchemaError(f"{path}: schema header must be name,kind,role")
        return [SchemaEntry.of(r["name"].strip(), r["kind"].strip(), r["role"].strip()) for r in reader]


def write_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "kind", "role"])
        for entry in schema:
            writer.writerow([entry.name, entry.kind.value, entry.role.value])


def _parse_number(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row=line, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite number {text!r}", row=line, column=column)
    return value


def load_csv(path: str | Path, schema: Schema) -> Table:
    """Load a comma-separated UTF-8 file whose header matches ``schema``.

    Empty fields become missing cells. Reported row numbers are file line
    numbers (the header is line 1).
    """
    with _open_input(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        expected = [e.name for e in schema]
        if header != expected:
            missing = [n for n in expected if n not in header]
            extra = [h for h in header if h not in expected]
            if missing:
                raise SchemaError(f"{path}: header lacks column {missing[0]!r}")
            if extra:
                raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
            raise SchemaError(f"{path}: header order {header} differs from schema {expected}")
        raw: list[list] = [[] for _ in schema]
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(schema):
                raise ParseError(f"expected {len(schema)} fields, got {len(row)}", row=line, column=None)
            for j, (entry, text) in enumerate(zip(schema, row)):
                text = text.strip()
                if text == "":
                    raw[j].append(None)
                elif entry.kind is ColumnKind.NUMERIC:
                    raw[j].append(_parse_number(text, line, entry.name))
                else:
                    raw[j].append(text)
    columns = []
    for entry, cells in zip(schema, raw):
        if entry.kind is ColumnKind.NUMERIC:
            columns.append(Column.numeric(entry.name, cells, entry.role))
        else:
            columns.append(Column(entry.name, entry.kind, entry.role, cells))
    return Table(tuple(columns))


def infer_schema(path: str | Path, identifiers: Sequence[str] = ("row_id", "campaign")) -> list[SchemaEntry]:
    """Guess a schema: columns whose present cells all parse as finite numbers are numeric."""
    with _open_input(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        numeric = [True] * len(header)
        for row in reader:
            for j, text in enumerate(row):
                text = text.strip()
                if text and numeric[j]:
                    try:
                        numeric[j] = math.isfinite(float(text))
                    except ValueError:
                        numeric[j] = False
    schema = []
    for name, is_num in zip(header, numeric):
        if name in identifiers:
            schema.append(SchemaEntry(name, ColumnKind.IDENTIFIER, Role.IDENTIFIER))
        elif is_num:
            schema.append(SchemaEntry(name, ColumnKind.NUMERIC, Role.INDEPENDENT))
        else:
            schema.append(SchemaEntry(name, ColumnKind.CATEGORICAL, Role.INDEPENDENT))
    return schema


def format_float(value: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def write_csv(table: Table, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        cells = [c.cells() for c in table.columns]
        for i in range(table.row_count):
            row = []
            for col, col_cells in zip(table.columns, cells):
                v = col_cells[i]
                if v is None:
                    row.append("")
                elif col.kind is ColumnKind.NUMERIC:
                    row.append(format_float(v))
                else:
                    row.append(v)
            writer.writerow(row)


# --------------------------------------------------------------- statistics


@dataclass(frozen=True)
class ColumnStats:
    """Moments of one numeric column over its present cells.

    ``skewness_population`` and ``kurtosis_population`` are the plain moment
    ratios m3/m2**1.5 and m4/m2**2 (normal kurtosis is 3). The sample
    variants are the bias-adjusted G1 and excess G2; they are ``None`` when
    fewer than 3 (G1) or 4 (G2) values are present.
    """

    name: str
    count_present: int
    mean: float
    std_sample: float
    min: float
    max: float
    skewness_population: float
    skewness_sample: float | None
    kurtosis_population: float
    kurtosis_excess_sample: float | None

    FIELDS = (
        "name",
        "count_present",
        "mean",
        "std_sample",
        "min",
        "max",
        "skewness_population",
        "skewness_sample",
        "kurtosis_population",
        "kurtosis_excess_sample",
    )

    def as_row(self) -> list[str]:
        out = []
        for f in self.FIELDS:
            v = getattr(self, f)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(format_float(v))
            else:
                out.append(str(v))
        return out


def moments(x: np.ndarray) -> tuple[float, float, float, float]:
    """Mean and the 2nd-4th central moments (n denominator)."""
    n = x.size
    mean = float(x.sum() / n)
    d = x - mean
    d2 = d * d
    return mean, float(d2.sum() / n), float((d2 * d).sum() / n), float((d2 * d2).sum() / n)


def column_stats(table: Table, name: str, require_adjusted: bool = False) -> ColumnStats:
    col = table[name]
    if col.kind is not ColumnKind.NUMERIC:
        raise KindError(f"column {name!r} is {col.kind.value}, expected numeric")
    x = col.present_values()
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"column {name!r} has {n} present values; need at least 2")
    if require_adjusted and n < 4:
        raise InsufficientDataError(f"column {name!r}: excess sample kurtosis needs 4 values, have {n}")
    mean, m2, m3, m4 = moments(x)
    if m2 == 0.0:
        raise UndefinedMomentsError(f"column {name!r} is constant; skewness/kurtosis undefined")
    skew = m3 / m2**1.5
    kurt = m4 / (m2 * m2)
    skew_s = skew * math.sqrt(n * (n - 1)) / (n - 2) if n >= 3 else None
    kurt_s = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * (kurt - 3.0) + 6.0) if n >= 4 else None
    return ColumnStats(
        name=name,
        count_present=n,
        mean=mean,
        std_sample=math.sqrt(m2 * n / (n - 1)),
        min=float(x.min()),
        max=float(x.max()),
        skewness_population=skew,
        skewness_sample=skew_s,
        kurtosis_population=kurt,
        kurtosis_excess_sample=kurt_s,
    )


def write_stats_csv(stats: Sequence[ColumnStats], path: str | Path | None = None, stream=None) -> None:
    fh = open(path, "w", newline="", encoding="utf-8") if path is not None else stream
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ColumnStats.FIELDS)
        for s in stats:
            writer.writerow(s.as_row())
    finally:
        if path is not None:
            fh.close()


def record_count_for_target(table: Table, dependent: str) -> int:
    """Rows on which ``dependent`` is observed."""
    return table[dependent].count_present


def non_null_counts(table: Table) -> dict[str, int]:
    return {c.name: c.count_present for c in table.columns}
