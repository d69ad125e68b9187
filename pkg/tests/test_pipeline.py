import json

import pytest

from conftest import GRAMMAR, KB, SCHEMA, TABLE
from islandq.errors import DanglingParent, IslandqError
from islandq.parser import ParseConfig
from islandq.pipeline import load_resources, run_chunk, run_eval, run_parse, run_query

CFG = ParseConfig()

QT_CHUNK = {"cat": "query_type", "start": 2, "end": 3, "text": "l'adresse", "weight": 0.8}
BT_CHUNK = {"cat": "business_type", "start": 4, "end": 5, "text": "urgences", "weight": 0.8}

# Scores over fixtures/gold.jsonl.  Three utterances are designed to degrade:
# a mid-utterance correction, a split surname, and a frame whose category
# the consistency check discards.
EXPECTED_REPORT = {
    "per_slot": {
        "category": {"tp": 4, "fp": 0, "fn": 1, "precision": 1.0, "recall": 0.8, "f1": 0.888888888888889},
        "city": {"tp": 18, "fp": 0, "fn": 0, "precision": 1.0, "recall": 1.0, "f1": 1.0},
        "name": {"tp": 14, "fp": 0, "fn": 1, "precision": 1.0, "recall": 0.9333333333333333, "f1": 0.9655172413793104},
        "query": {"tp": 19, "fp": 1, "fn": 1, "precision": 0.95, "recall": 0.95, "f1": 0.9500000000000001},
    },
    "micro": {
        "tp": 55, "fp": 1, "fn": 3,
        "precision": 0.9821428571428571,
        "recall": 0.9482758620689655,
        "f1": 0.9649122807017544,
    },
    "examples": 20,
    "worst": [
        {"utterance": "je cherche le numéro euh non l'adresse de roux à fribourg", "errors": 1},
        {"utterance": "j'aimerais le numéro de du pont à lausanne", "errors": 1},
        {"utterance": "euh j'aimerais l'adresse des urgences euh", "errors": 1},
    ],
}


# --- resource loading ---

def test_everything_loads_and_cross_checks(resources):
    assert resources.grammar.start == "request"
    assert resources.chunk_cats == ("query_type", "person_name", "business_type", "city")
    assert [s.name for s in resources.schema.slots] == ["query", "name", "category", "city"]
    assert resources.kb.context == "accueil"
    assert len(resources.table) == 50


def test_grammar_alone_is_enough_for_parse():
    res = load_resources(GRAMMAR)
    assert res.schema is None and res.kb is None and res.table is None
    out = run_parse(res, "le numéro", CFG)
    assert out["analyses"]


def test_unknown_context_is_rejected():
    with pytest.raises(DanglingParent, match="zurich"):
        load_resources(GRAMMAR, SCHEMA, KB, TABLE, context="zurich")


def test_schema_source_category_must_be_chunkable(tmp_path):
    bad = tmp_path / "s.json"
    bad.write_text(json.dumps({"slots": [
        {"name": "query", "db_attribute": "", "required": True, "source_category": "widget"},
    ]}), encoding="utf-8")
    with pytest.raises(IslandqError, match="not a declared chunk category"):
        load_resources(GRAMMAR, bad)


def test_kb_slots_must_exist_in_schema(tmp_path):
    bad = tmp_path / "bad.kb"
    bad.write_text("context t\n\ntheory t\n  default canton = vd\n", encoding="utf-8")
    with pytest.raises(IslandqError, match="unknown slot canton"):
        load_resources(GRAMMAR, SCHEMA, bad, TABLE)
    bad.write_text(
        "context t\n\ntheory t\n  constraint incompatible canton=vd query=numéro\n",
        encoding="utf-8",
    )
    with pytest.raises(IslandqError, match="t.c0: unknown slot canton"):
        load_resources(GRAMMAR, SCHEMA, bad, TABLE)


def test_query_stage_requires_the_optional_resources():
    res = load_resources(GRAMMAR)
    with pytest.raises(IslandqError, match="schema"):
        run_query(res, "le numéro", CFG)
    with pytest.raises(IslandqError, match="schema"):
        run_eval(res, "", CFG)


# --- parse stage ---

def test_parse_reports_best_start_analyses(resources):
    out = run_parse(resources, "le numéro", CFG)
    assert out["input"] == ["le", "numéro"]
    assert len(out["analyses"]) == 1
    rec = out["analyses"][0]
    assert set(rec) == {"id", "cat", "start", "end", "covered", "weight", "rule", "children"}
    assert rec["cat"] == "request"
    assert (rec["start"], rec["end"], rec["covered"], rec["weight"]) == (1, 2, [1], 0.7)
    assert "chart" not in out


def test_parse_show_chart_resolves_every_child(resources):
    out = run_parse(resources, "le numéro", CFG, show_chart=True)
    assert out["chart"]["input"] == ["le", "numéro"]
    ids = {e["id"] for e in out["chart"]["edges"]}
    for rec in out["analyses"]:
        assert rec["id"] in ids
        assert all(child in ids for child in rec["children"])


# --- chunk stage ---

def test_chunk_pinned_example(resources):
    out = run_chunk(resources, "euh j'aimerais l'adresse des urgences euh", CFG, top_k=3)
    assert out == {
        "input": ["euh", "j'aimerais", "l'adresse", "des", "urgences", "euh"],
        "markers": [
            {"marker": "announcement_query", "role": "separator", "start": 1, "end": 2, "weight": 0.9}
        ],
        "segments": [
            {"kind": "announcement", "start": 0, "end": 1},
            {"kind": "query_body", "start": 2, "end": 6},
        ],
        "chunks": [QT_CHUNK, BT_CHUNK],
        "hypotheses": [
            {"weight": 0.8, "chunks": [QT_CHUNK, BT_CHUNK]},
            {"weight": 0.8, "chunks": [QT_CHUNK]},
            {"weight": 0.8, "chunks": [BT_CHUNK]},
        ],
    }


def test_chunk_show_lattice(resources):
    out = run_chunk(
        resources, "euh j'aimerais l'adresse des urgences euh", CFG, show_lattice=True
    )
    lattice = out["lattice"]
    assert lattice["nodes"] == 7
    kinds = [a["kind"] for a in lattice["arcs"]]
    assert kinds.count("chunk") == 2 and kinds.count("marker") == 1 and kinds.count("skip") == 6
    labels = {a["label"] for a in lattice["arcs"] if a["kind"] != "skip"}
    assert labels == {"query_type", "business_type", "announcement_query"}
    assert all(a["label"] is None for a in lattice["arcs"] if a["kind"] == "skip")


# --- query stage ---

def test_query_full_extraction(resources):
    out = run_query(resources, "j'aimerais le numéro de dupont à lausanne", CFG)
    assert out["input"] == ["j'aimerais", "le", "numéro", "de", "dupont", "à", "lausanne"]
    assert out["best"] == {
        "slots": {
            "query": {"value": "numéro", "confidence": 0.8, "origin": "extracted"},
            "name": {"value": "dupont", "confidence": 0.8, "origin": "extracted"},
            "city": {"value": "lausanne", "confidence": 0.8, "origin": "extracted"},
        },
        "weight": 0.8,
        "consistent": True,
        "violations": [],
    }
    assert len(out["frames"]) == 5 and out["frames"][0] == out["best"]
    assert out["query"] == {
        "predicates": [
            {"attribute": "name", "value": "dupont"},
            {"attribute": "city", "value": "lausanne"},
        ],
        "rendered": 'name="dupont" AND city="lausanne"',
    }
    assert out["records"] == [
        {
            "name": "dupont",
            "category": "",
            "city": "lausanne",
            "phone": "021 316 11 01",
            "address": "3 rue du bourg",
        }
    ]


def test_unparseable_input_falls_back_to_context_defaults(resources):
    out = run_query(resources, "blablabla euh", CFG)
    assert out["best"]["weight"] == 0.1
    assert out["best"]["slots"] == {
        "query": {"value": "numéro", "confidence": 0.5, "origin": "defaulted"},
        "city": {"value": "lausanne", "confidence": 0.5, "origin": "defaulted"},
    }
    assert out["best"]["consistent"] is True
    assert out["query"]["rendered"] == 'city="lausanne"'
    assert len(out["records"]) == 12
    assert all(r["city"] == "lausanne" for r in out["records"])


def test_context_override_changes_the_default_city():
    res = load_resources(GRAMMAR, SCHEMA, KB, TABLE, context="geneve")
    out = run_query(res, "blablabla euh", CFG)
    assert out["best"]["slots"]["city"]["value"] == "genève"
    assert out["query"]["rendered"] == 'city="genève"'


def test_inconsistent_best_frame_withholds_query_and_records(tmp_path):
    kb = tmp_path / "t.kb"
    kb.write_text(
        "context t\n\ntheory t\n"
        "  default query = l'adresse\n"
        "  default category = urgences\n"
        "  constraint incompatible query=l'adresse category=urgences\n",
        encoding="utf-8",
    )
    res = load_resources(GRAMMAR, SCHEMA, kb, TABLE)
    out = run_query(res, "blablabla", CFG)
    assert out["frames"][0]["consistent"] is False
    assert out["frames"][0]["violations"] == ["t.c0"]
    assert "best" not in out and "query" not in out and "records" not in out


def test_wide_segments_rescue_islands_before_the_separator(resources):
    text = "le numéro j'aimerais euh dupont à lausanne"
    narrow = run_query(resources, text, CFG)
    assert narrow["best"]["slots"]["query"]["origin"] == "defaulted"
    assert narrow["best"]["slots"]["name"]["value"] == "dupont"
    wide = run_query(resources, text, CFG, wide_segments=True)
    assert wide["best"]["slots"]["query"] == {
        "value": "numéro", "confidence": 0.8, "origin": "extracted",
    }


# --- eval stage ---

def test_eval_fixture_report(resources, gold_text):
    assert run_eval(resources, gold_text, CFG) == EXPECTED_REPORT


def test_eval_clean_subset_is_perfect(resources, gold_text):
    clean = "\n".join(gold_text.splitlines()[:10])
    report = run_eval(resources, clean, CFG)
    assert report["micro"] == {
        "tp": 29, "fp": 0, "fn": 0, "precision": 1.0, "recall": 1.0, "f1": 1.0,
    }
    assert report["worst"] == []


def test_stage_outputs_serialize_identically_across_runs(resources, gold_text):
    text = "j'aimerais le numéro de dupont à lausanne"
    assert json.dumps(run_query(resources, text, CFG)) == json.dumps(run_query(resources, text, CFG))
    assert json.dumps(run_chunk(resources, text, CFG, show_lattice=True)) == json.dumps(
        run_chunk(resources, text, CFG, show_lattice=True)
    )
    assert json.dumps(run_eval(resources, gold_text, CFG)) == json.dumps(
        run_eval(resources, gold_text, CFG)
    )
