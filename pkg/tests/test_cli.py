"""Command line interface behavior and exit codes."""

from __future__ import annotations

import json

import pytest

from factlink.cli import main
from factlink.session import bundled_data_dir, bundled_knowledge_file


def run_cli(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse usage failures
        code = exc.code
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_query_sentence(capsys):
    code, out, _ = run_cli(capsys, "query", "Find the function of gene repA1")
    assert code == 0
    assert "Plasmid maintenance" in out
    assert "yes" in out  # derived marker


def test_query_empty_sentence_usage_error(capsys):
    code, _, err = run_cli(capsys, "query", "")
    assert code == 1
    assert "sentence" in err


def test_no_subcommand_usage_error(capsys):
    code, _, _ = run_cli(capsys)
    assert code == 1


def test_query_goal(capsys):
    code, out, _ = run_cli(
        capsys,
        "query",
        "--goal",
        "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'UniProtProteinID',Val)",
        "--strategy",
        "direct",
    )
    assert code == 0
    assert "O85067" in out


def test_query_baseline_flag(capsys):
    code, out, _ = run_cli(
        capsys, "query", "--baseline", "List all F-box domain protein 2 sequences"
    )
    assert code == 0
    assert "CTCTTTCTTTCG ..." in out
    assert "CTCTTTCTTTCT" not in out


def test_query_json_format(capsys):
    code, out, _ = run_cli(
        capsys,
        "query",
        "--format",
        "json",
        "What are the functions of UniProt proteins Q9UKT8 and Q9NVA1",
    )
    assert code == 0
    payload = json.loads(out)
    values = {tuple(r["values"]) for r in payload["rows"]}
    assert values == {("Cytoplasmic vesicle",), ("Substrate recognition",)}
    assert payload["result_id"]


def test_query_dump_intent_and_sql(capsys):
    code, out, _ = run_cli(
        capsys, "query", "--dump-intent", "--sql", "Find the function of gene repA1"
    )
    assert code == 0
    assert '"target_concept": "Gene"' in out
    assert "SELECT" in out


def test_query_explain(capsys):
    code, out, _ = run_cli(
        capsys, "query", "--explain", "Find the function of gene repA1"
    )
    assert code == 0
    assert '"kind": "derived"' in out
    assert "O85067" in out


def test_load_subcommand(capsys):
    code, out, _ = run_cli(
        capsys, "load", str(bundled_data_dir()), str(bundled_knowledge_file())
    )
    assert code == 0
    assert "25 facts" in out
    assert "BLAST" in out


def test_load_missing_dir_exits_2(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "load", str(tmp_path), str(bundled_knowledge_file())
    )
    assert code == 2
    assert "not found" in err


def test_unparsable_sentence_exits_2(capsys):
    code, _, err = run_cli(capsys, "query", "bananas are yellow ships")
    assert code == 2
    assert "UnparsableSentence" in err
