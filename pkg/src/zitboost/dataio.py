"""CSV ingestion and emission.

Tables are read into a column-oriented :class:`RawTable` that keeps the
original cell strings, so columns that are not transformed can be written
back byte for byte.  Numbers are written with ``repr`` (shortest
round-trip form), which makes every output deterministic.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .compositional import CompositionBlock, apply_blocks
from .config import SchemaConfig
from .engine import Dataset


class DataError(ValueError):
    """A data file does not match its schema."""


@dataclass
class RawTable:
    header: List[str]
    cells: Dict[str, List[str]]

    @property
    def n_rows(self) -> int:
        return len(self.cells[self.header[0]]) if self.header else 0

    def numeric(self, name: str) -> np.ndarray:
        """Parse a column as floats; rejects empty, NaN and infinite cells."""
        if name not in self.cells:
            raise DataError(f"column {name!r} not found; header is {self.header}")
        out = np.empty(self.n_rows)
        for i, s in enumerate(self.cells[name]):
            try:
                v = float(s)
            except ValueError:
                raise DataError(f"row {i + 1}, column {name!r}: cannot parse {s!r} as a number")
            if not math.isfinite(v):
                raise DataError(f"row {i + 1}, column {name!r}: non-finite value {s!r}")
            out[i] = v
        return out

    def text(self, name: str) -> np.ndarray:
        if name not in self.cells:
            raise DataError(f"column {name!r} not found; header is {self.header}")
        return np.asarray(self.cells[name], dtype=str)


def read_csv(path) -> RawTable:
    """Read a comma-separated UTF-8 file with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, a header row is required")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        cols: Dict[str, List[str]] = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno} has {len(row)} fields, "
                                f"expected {len(header)}")
            for h, v in zip(header, row):
                cols[h].append(v)
    return RawTable(header=header, cells=cols)


def format_float(v: float) -> str:
    return repr(float(v))


def write_csv(path, header: Sequence[str], columns: Sequence[Sequence[str]]):
    """Write already-formatted string columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in zip(*columns):
            w.writerow(row)


def write_table(path, table: Dict[str, object]):
    """Write a dict of columns; float arrays are formatted with ``repr``."""
    header = list(table)
    cols = []
    for h in header:
        col = table[h]
        if isinstance(col, np.ndarray) and col.dtype.kind == "f":
            cols.append([format_float(v) for v in col])
        else:
            cols.append([str(v) for v in col])
    write_csv(path, header, cols)


def write_records(path, records: Sequence[Dict[str, object]], fields: Sequence[str]):
    """Write dict rows; floats with ``repr``, missing keys as empty cells."""
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return format_float(v)
        return str(v)
    write_csv(path, fields, [[fmt(r.get(f)) for r in records] for f in fields])


def check_schema(table: RawTable, schema: SchemaConfig):
    missing = [c for c in schema.columns if c not in table.cells]
    if missing:
        raise DataError(f"columns declared in the config are missing from the data: {missing}")


def build_dataset(table: RawTable, schema: SchemaConfig,
                  blocks: Sequence[CompositionBlock] = (), with_target: bool = True) -> Dataset:
    """Turn a raw table into a :class:`Dataset`.

    Composition blocks (already fitted) replace their member columns by
    their derived columns among the numeric features.
    """
    check_schema(table, schema)
    numeric_names = schema.names("numeric")
    numeric = {c: table.numeric(c) for c in numeric_names}
    numeric = apply_blocks(numeric, blocks, numeric_names) if blocks else numeric
    categorical = {c: table.text(c) for c in schema.names("categorical")}
    exposure = table.numeric(schema.exposure_column)
    bad = np.flatnonzero(exposure <= 0)
    if bad.size:
        raise DataError(f"row {bad[0] + 1}, column {schema.exposure_column!r}: "
                        "exposure must be positive")
    target = None
    if with_target:
        target = table.numeric(schema.target_column)
        bad = np.flatnonzero(target < 0)
        if bad.size:
            raise DataError(f"row {bad[0] + 1}, column {schema.target_column!r}: "
                            "target must be non-negative")
    return Dataset(numeric=numeric, categorical=categorical, exposure=exposure, target=target)


def numeric_table(table: RawTable, schema: SchemaConfig) -> Dict[str, np.ndarray]:
    return {c: table.numeric(c) for c in schema.names("numeric")}


def subset_table(table: RawTable, rows: Sequence[int]) -> RawTable:
    rows = list(rows)
    return RawTable(header=list(table.header),
                    cells={h: [v[i] for i in rows] for h, v in table.cells.items()})
