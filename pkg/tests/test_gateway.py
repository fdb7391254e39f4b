"""Tool gateway: registration, pair verdicts, extraction."""

from __future__ import annotations

import pytest

from factlink.errors import InvalidSpec, SchemaMismatch, ToolUnavailable
from factlink.gateway import ToolGateway, ToolSpec
from factlink.tables import RelationalTable


def fixture_spec(path, symmetric=True, name="BLAST"):
    return ToolSpec(
        name=name,
        verifies=("Ortholog",),
        adapter="fixture",
        location=str(path),
        extract_fields=("OrthologGeneID",),
        submit_schema=("GeneID",),
        symmetric=symmetric,
    )


@pytest.fixture()
def pair_file(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("GeneID,OrthologGeneID\n30050,26190\n", encoding="utf-8")
    return path


def test_apply_op_bundled(gateway):
    assert gateway.apply_op("BLAST", "30050", "26190") is True
    assert gateway.apply_op("BLAST", "26190", "30050") is True  # symmetric fixture
    assert gateway.apply_op("BLAST", "30050", "55245") is False


def test_apply_op_unregistered(gateway):
    with pytest.raises(ToolUnavailable):
        gateway.apply_op("NOPE", "x", "y")


def test_register_missing_fixture_file(tmp_path):
    gateway = ToolGateway()
    with pytest.raises(InvalidSpec):
        gateway.register(fixture_spec(tmp_path / "absent.csv"))


def test_register_web_form_needs_filler_and_wrapper():
    gateway = ToolGateway()
    with pytest.raises(InvalidSpec):
        gateway.register(ToolSpec(name="Form", adapter="web-form", wrapper="w"))


def test_register_replaces(pair_file, tmp_path):
    gateway = ToolGateway()
    gateway.register(fixture_spec(pair_file))
    assert gateway.apply_op("BLAST", "30050", "26190")
    other = tmp_path / "other.csv"
    other.write_text("GeneID,OrthologGeneID\n1,2\n", encoding="utf-8")
    gateway.clear_memo()
    gateway.register(fixture_spec(other))
    assert gateway.apply_op("BLAST", "1", "2")
    assert not gateway.apply_op("BLAST", "30050", "26190")


def test_symmetry_property(pair_file):
    gateway = ToolGateway()
    gateway.register(fixture_spec(pair_file, symmetric=True))
    pairs = [("30050", "26190"), ("26190", "30050"), ("1", "2")]
    for a, b in pairs:
        assert gateway.apply_op("BLAST", a, b) == gateway.apply_op("BLAST", b, a)


def test_asymmetric_fixture_not_closed(pair_file):
    gateway = ToolGateway()
    gateway.register(fixture_spec(pair_file, symmetric=False))
    assert gateway.apply_op("BLAST", "30050", "26190") is True
    assert gateway.apply_op("BLAST", "26190", "30050") is False


def test_memoization_transparency(pair_file):
    gateway = ToolGateway()
    gateway.register(fixture_spec(pair_file))
    probes = [("30050", "26190"), ("30050", "26190"), ("9", "9")]
    with_memo = [gateway.apply_op("BLAST", a, b) for a, b in probes]
    first_reads = gateway.probe_count
    assert first_reads == 2  # second identical probe served from the memo
    gateway.clear_memo()
    without_memo = [gateway.apply_op("BLAST", a, b) for a, b in probes]
    assert with_memo == without_memo


def test_extract_empty_input(gateway):
    spec = gateway.spec("BLAST")
    empty = RelationalTable(name="in", columns=["GeneID"], rows=[])
    out = gateway.extract(spec, empty)
    assert out.columns == ["OrthologGeneID"]
    assert out.rows == []


def test_extract_bundled(gateway):
    table = RelationalTable(name="in", columns=["GeneID"], rows=[("30050",)])
    out = gateway.extract("BLAST", table)
    assert out.rows == [("26190",)]


def test_extract_two_rows_two_partners_each(tmp_path):
    # oracle: scan the fixture file and count matching lines per key
    path = tmp_path / "multi.csv"
    lines = ["GeneID,OrthologGeneID", "a,p1", "a,p2", "b,p3", "b,p4", "c,p5"]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    gateway = ToolGateway()
    gateway.register(fixture_spec(path, symmetric=False))
    table = RelationalTable(name="in", columns=["GeneID"], rows=[("a",), ("b",)])
    expected = [l.split(",")[1] for l in lines[1:] if l.split(",")[0] in ("a", "b")]
    out = gateway.extract("BLAST", table)
    assert len(out.rows) == len(expected) == 4
    assert [r[0] for r in out.rows] == expected


def test_extract_schema_mismatch(pair_file):
    gateway = ToolGateway()
    spec = ToolSpec(
        name="BLAST",
        adapter="fixture",
        location=str(pair_file),
        extract_fields=("NoSuchField",),
        submit_schema=("GeneID",),
    )
    gateway.register(spec)
    table = RelationalTable(name="in", columns=["GeneID"], rows=[("30050",)])
    with pytest.raises(SchemaMismatch):
        gateway.extract(spec, table)


def test_extract_missing_submit_column(gateway):
    table = RelationalTable(name="in", columns=["Other"], rows=[("x",)])
    with pytest.raises(SchemaMismatch):
        gateway.extract("BLAST", table)


def test_remote_adapter_disabled_by_default():
    gateway = ToolGateway()
    gateway.register(
        ToolSpec(name="WS", adapter="web-service", transformer="flatten")
    )
    with pytest.raises(ToolUnavailable):
        gateway.apply_op("WS", "a", "b")


def test_remote_adapter_with_injected_transport():
    calls = []

    def transport(spec, payload):
        calls.append(payload)
        return [{"OrthologGeneID": "z"}] if payload["id_a"] == "a" else []

    gateway = ToolGateway(allow_remote=True, transport=transport)
    gateway.register(
        ToolSpec(name="WS", adapter="web-service", transformer="flatten")
    )
    assert gateway.apply_op("WS", "a", "b") is True
    assert gateway.apply_op("WS", "x", "y") is False
    assert len(calls) == 2
