import io
import json
import sys

from conftest import GOLD, GRAMMAR, KB, SCHEMA, TABLE
from islandq.cli import main

QUERY_FLAGS = [
    "--grammar", str(GRAMMAR),
    "--schema", str(SCHEMA),
    "--kb", str(KB),
    "--table", str(TABLE),
]


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_prints_json_and_succeeds(capsys):
    code, out, err = run(capsys, "parse", "--grammar", str(GRAMMAR), "le numéro")
    assert code == 0 and err == ""
    data = json.loads(out)
    assert data["analyses"][0]["cat"] == "request"


def test_parse_show_chart(capsys):
    code, out, _ = run(capsys, "parse", "--grammar", str(GRAMMAR), "--show-chart", "le numéro")
    assert code == 0
    assert "chart" in json.loads(out)


def test_parse_with_no_analysis_exits_two(capsys):
    code, out, _ = run(
        capsys, "parse", "--grammar", str(GRAMMAR), "--threshold", "1.0", "le numéro"
    )
    assert code == 2
    assert json.loads(out)["analyses"] == []


def test_missing_grammar_exits_one(capsys):
    code, out, err = run(capsys, "parse", "--grammar", "/nonexistent.grammar", "x")
    assert code == 1
    assert out == ""
    assert err.startswith("islandq:")


def test_dash_reads_the_utterance_from_stdin(capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO("le numéro"))
    code, out, _ = run(capsys, "parse", "--grammar", str(GRAMMAR), "-")
    assert code == 0
    assert json.loads(out)["input"] == ["le", "numéro"]


def test_chunk_reports_hypotheses(capsys):
    code, out, _ = run(
        capsys,
        "chunk", "--grammar", str(GRAMMAR), "--top-k", "3",
        "euh j'aimerais l'adresse des urgences euh",
    )
    assert code == 0
    data = json.loads(out)
    assert len(data["hypotheses"]) == 3
    assert data["hypotheses"][0]["weight"] == 0.8


def test_query_retrieves_records(capsys):
    code, out, _ = run(capsys, "query", *QUERY_FLAGS, "j'aimerais le numéro de dupont à lausanne")
    assert code == 0
    data = json.loads(out)
    assert data["best"]["slots"]["name"]["value"] == "dupont"
    assert len(data["records"]) == 1


def test_query_falls_back_on_gibberish(capsys):
    code, out, _ = run(capsys, "query", *QUERY_FLAGS, "blablabla euh")
    assert code == 0
    assert json.loads(out)["query"]["rendered"] == 'city="lausanne"'


def test_query_context_flag(capsys):
    code, out, _ = run(capsys, "query", *QUERY_FLAGS, "--context", "geneve", "blablabla euh")
    assert code == 0
    assert json.loads(out)["best"]["slots"]["city"]["value"] == "genève"


def test_query_without_consistent_frame_exits_two(capsys, tmp_path):
    kb = tmp_path / "t.kb"
    kb.write_text(
        "context t\n\ntheory t\n"
        "  default query = l'adresse\n"
        "  default category = urgences\n"
        "  constraint incompatible query=l'adresse category=urgences\n",
        encoding="utf-8",
    )
    flags = QUERY_FLAGS[:4] + ["--kb", str(kb)] + QUERY_FLAGS[6:]
    code, out, _ = run(capsys, "query", *flags, "blablabla")
    assert code == 2
    data = json.loads(out)
    assert "best" not in data and data["frames"]


def test_eval_reports_metrics(capsys):
    code, out, _ = run(capsys, "eval", *QUERY_FLAGS, str(GOLD))
    assert code == 0
    data = json.loads(out)
    assert data["examples"] == 20
    assert data["micro"]["f1"] == 0.9649122807017544


def test_eval_empty_gold_file(capsys, tmp_path):
    gold = tmp_path / "empty.jsonl"
    gold.write_text("", encoding="utf-8")
    code, out, _ = run(capsys, "eval", *QUERY_FLAGS, str(gold))
    assert code == 0
    data = json.loads(out)
    assert data["examples"] == 0
    assert data["micro"]["precision"] == 1.0


def test_eval_bad_gold_exits_one(capsys, tmp_path):
    gold = tmp_path / "bad.jsonl"
    gold.write_text('{"utterance": "x", "frame": {"canton": "vd"}}\n', encoding="utf-8")
    code, out, err = run(capsys, "eval", *QUERY_FLAGS, str(gold))
    assert code == 1
    assert out == ""
    assert "unknown slot" in err


def test_module_entry_point_runs_in_a_subprocess(cli):
    proc = cli(["parse", "--grammar", str(GRAMMAR), "le numéro"])
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["analyses"]
