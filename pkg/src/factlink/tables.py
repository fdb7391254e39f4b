"""Flat relational tables and their delimited-text serialization.

Tables are read from comma-separated files whose first line carries the
column names (UTF-8; quoted fields may contain commas).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ArityMismatch


@dataclass
class RelationalTable:
    """A named flat table of string cells."""

    name: str
    columns: list[str]
    rows: list[tuple[str, ...]] = field(default_factory=list)

    def validate(self) -> None:
        """Check column uniqueness and row arity."""
        if len(set(self.columns)) != len(self.columns):
            raise ArityMismatch(f"table {self.name!r} has duplicate column names")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ArityMismatch(
                    f"table {self.name!r} row {i} has {len(row)} cells, expected {width}"
                )

    def column_index(self, column: str) -> int:
        return self.columns.index(column)

    def cell(self, row: tuple[str, ...], column: str) -> str:
        return row[self.column_index(column)]


def read_table(path: str | Path, name: str | None = None) -> RelationalTable:
    """Read a delimited table file; the table name defaults to the file stem."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            columns = next(reader)
        except StopIteration:
            raise ArityMismatch(f"table file {path} is empty") from None
        rows = [tuple(row) for row in reader if row]
    table = RelationalTable(name=name or path.stem, columns=list(columns), rows=rows)
    table.validate()
    return table


def write_table(table: RelationalTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(table.columns)
        writer.writerows(table.rows)


def table_to_text(table: RelationalTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(table.columns)
    writer.writerows(table.rows)
    return buffer.getvalue()
