"""Delimited table reading and writing."""

from __future__ import annotations

import pytest

from factlink.errors import ArityMismatch
from factlink.tables import RelationalTable, read_table, table_to_text, write_table


def test_read_table_with_quoted_commas(tmp_path):
    path = tmp_path / "Things.csv"
    path.write_text('Name,Note\nwidget,"small, round"\n', encoding="utf-8")
    table = read_table(path)
    assert table.name == "Things"
    assert table.columns == ["Name", "Note"]
    assert table.rows == [("widget", "small, round")]


def test_read_rejects_ragged_rows(tmp_path):
    path = tmp_path / "Bad.csv"
    path.write_text("A,B\n1\n", encoding="utf-8")
    with pytest.raises(ArityMismatch):
        read_table(path)


def test_validate_rejects_duplicate_columns():
    table = RelationalTable(name="T", columns=["A", "A"], rows=[])
    with pytest.raises(ArityMismatch):
        table.validate()


def test_write_read_roundtrip(tmp_path):
    table = RelationalTable(
        name="T", columns=["A", "B"], rows=[("1", "x , y"), ("2", "")]
    )
    path = tmp_path / "T.csv"
    write_table(table, path)
    assert read_table(path).rows == table.rows
    assert "x , y" in table_to_text(table)


def test_bundled_tables_shape(system):
    assert system.tables["UniProt"].columns == ["ProteinName", "ProteinID", "Function"]
    assert len(system.tables["Entrez"].rows) == 4
    cell = system.tables["Entrez"].cell(system.tables["Entrez"].rows[0], "DNASequence")
    assert cell == "CTCTTTCTTTCG ..."
