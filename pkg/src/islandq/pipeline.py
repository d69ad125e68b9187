"""End-to-end wiring: load shared resources, run the processing stages.

Each run_* function returns a JSON-ready dict with deterministic key and list
ordering, so two runs over the same inputs serialize byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .chunking import (
    Segment,
    build_lattice,
    enumerate_hypotheses,
    extract_chunks,
    find_markers,
    segment,
)
from .datastore import evaluate, execute, load_gold, load_table
from .errors import DanglingParent, IslandqError
from .frames import (
    FrameSchema,
    KnowledgeBase,
    complete_frame,
    frames_from_hypotheses,
    load_kb,
    load_schema,
    select_best,
    to_query,
)
from .grammar import Grammar, load_grammar
from .parser import (
    ParseConfig,
    Span,
    analyses,
    maximal_coverage,
    minimal_spans,
    parse,
    tokenize,
)


@dataclass(frozen=True)
class Resources:
    grammar: Grammar
    chunk_cats: tuple[str, ...]
    schema: FrameSchema | None = None
    kb: KnowledgeBase | None = None
    table: list | None = None


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_resources(
    grammar_path,
    schema_path=None,
    kb_path=None,
    table_path=None,
    context=None,
) -> Resources:
    """Load and cross-check every file the requested pipeline stage needs."""
    grammar = load_grammar(_read(grammar_path))
    chunk_cats = grammar.chunk_categories()
    schema = load_schema(_read(schema_path)) if schema_path else None
    kb = load_kb(_read(kb_path)) if kb_path else None
    table = load_table(_read(table_path)) if table_path else None

    if kb and context:
        if context not in kb.theories:
            raise DanglingParent(f"context {context} is not a defined theory")
        kb = replace(kb, context=context)

    if schema:
        for slot in schema.slots:
            if slot.source_category not in chunk_cats:
                raise IslandqError(
                    f"slot {slot.name}: source category {slot.source_category} "
                    "is not a declared chunk category"
                )
    if schema and kb:
        names = schema.names()
        for theory in kb.theories.values():
            for slot in theory.defaults:
                if slot not in names:
                    raise IslandqError(f"theory {theory.name}: default for unknown slot {slot}")
            for c in theory.constraints:
                for slot in (c.slot_a, c.slot_b):
                    if slot not in names:
                        raise IslandqError(f"constraint {c.id}: unknown slot {slot}")

    return Resources(grammar=grammar, chunk_cats=chunk_cats, schema=schema, kb=kb, table=table)


def _edge_dict(e) -> dict:
    return {
        "id": e.id,
        "cat": e.category,
        "start": e.span.start,
        "end": e.span.end,
        "covered": sorted(e.coverage),
        "weight": e.weight,
        "rule": e.rule_id,
        "children": list(e.children),
    }


def _chunk_dict(c) -> dict:
    return {
        "cat": c.category,
        "start": c.span.start,
        "end": c.span.end,
        "text": c.text,
        "weight": c.weight,
    }


def run_parse(res: Resources, text: str, cfg: ParseConfig, show_chart: bool = False) -> dict:
    """Best start-category analyses: threshold filter, then maximal coverage,
    then minimal spans."""
    tokens = tokenize(text)
    chart = parse(res.grammar, tokens, cfg)
    best = minimal_spans(maximal_coverage(analyses(chart, res.grammar.start, cfg)))
    out = {"input": list(tokens), "analyses": [_edge_dict(e) for e in best]}
    if show_chart:
        out["chart"] = chart.dump()
    return out


def _chunk_stage(res: Resources, text: str, cfg: ParseConfig, top_k: int, wide_segments: bool):
    tokens = tokenize(text)
    chart = parse(res.grammar, tokens, cfg)
    occs = find_markers(res.grammar, tokens)
    segments = segment(tokens, occs)
    if wide_segments:
        chunk_segments = [Segment("query_body", Span(0, chart.input_len))]
    else:
        chunk_segments = [s for s in segments if s.kind == "query_body"]
    chunks = []
    for seg in chunk_segments:
        chunks.extend(extract_chunks(chart, seg, res.chunk_cats, cfg))
    lattice = build_lattice(chunks, occs, res.grammar.orders, chart.input_len)
    hypotheses = enumerate_hypotheses(lattice, top_k)
    return tokens, occs, segments, chunks, lattice, hypotheses


def _hypothesis_dict(h) -> dict:
    return {"weight": h.weight, "chunks": [_chunk_dict(c) for c in h.chunks]}


def run_chunk(
    res: Resources,
    text: str,
    cfg: ParseConfig,
    top_k: int = 5,
    show_lattice: bool = False,
    wide_segments: bool = False,
) -> dict:
    tokens, occs, segments, chunks, lattice, hypotheses = _chunk_stage(
        res, text, cfg, top_k, wide_segments
    )
    out = {
        "input": list(tokens),
        "markers": [
            {"marker": o.marker, "role": o.role, "start": o.span.start, "end": o.span.end, "weight": o.weight}
            for o in occs
        ],
        "segments": [
            {"kind": s.kind, "start": s.span.start, "end": s.span.end} for s in segments
        ],
        "chunks": [_chunk_dict(c) for c in chunks],
        "hypotheses": [_hypothesis_dict(h) for h in hypotheses],
    }
    if show_lattice:
        labels = {
            "chunk": lambda a: a.chunk.category,
            "marker": lambda a: a.marker.marker,
            "skip": lambda a: None,
        }
        out["lattice"] = {
            "nodes": lattice.n + 1,
            "arcs": [
                {"kind": a.kind, "start": a.start, "end": a.end, "label": labels[a.kind](a)}
                for a in lattice.arcs
            ],
        }
    return out


def _frame_dict(f, schema: FrameSchema) -> dict:
    slots = {}
    for slot in schema.slots:
        if slot.name in f.values:
            sv = f.values[slot.name]
            slots[slot.name] = {
                "value": sv.value,
                "confidence": sv.confidence,
                "origin": sv.origin,
            }
    return {
        "slots": slots,
        "weight": f.weight,
        "consistent": f.consistent,
        "violations": list(f.violations),
    }


def _require(res: Resources, *fields) -> None:
    for name in fields:
        if getattr(res, name) is None:
            raise IslandqError(f"stage needs a loaded {name}")


def _best_frames(res: Resources, text: str, cfg: ParseConfig, top_k: int, wide_segments: bool):
    _, _, _, _, _, hypotheses = _chunk_stage(res, text, cfg, top_k, wide_segments)
    frames = frames_from_hypotheses(hypotheses, res.schema)
    frames = [complete_frame(f, res.kb, res.schema) for f in frames]
    return select_best(frames, res.schema, top_k)


def run_query(
    res: Resources,
    text: str,
    cfg: ParseConfig,
    top_k: int = 5,
    wide_segments: bool = False,
) -> dict:
    """Ranked frames plus the records the best consistent frame retrieves."""
    _require(res, "schema", "kb", "table")
    tokens = tokenize(text)
    ranked = _best_frames(res, text, cfg, top_k, wide_segments)
    out = {
        "input": list(tokens),
        "frames": [_frame_dict(f, res.schema) for f in ranked],
    }
    best = ranked[0] if ranked and ranked[0].consistent else None
    if best is not None:
        query = to_query(best, res.schema)
        out["best"] = _frame_dict(best, res.schema)
        out["query"] = {
            "predicates": [{"attribute": a, "value": v} for a, v in query.predicates],
            "rendered": query.render(),
        }
        out["records"] = execute(query, res.table)
    return out


def run_eval(
    res: Resources,
    gold_text: str,
    cfg: ParseConfig,
    top_k: int = 5,
    wide_segments: bool = False,
    score_defaults: bool = False,
) -> dict:
    """Score the single best frame per gold utterance, consistent or not.

    top_k bounds the hypothesis pool each utterance is allowed to draw its
    best frame from; 1 would disable the consistency fallback entirely."""
    _require(res, "schema", "kb", "table")
    gold = load_gold(gold_text, res.schema)
    output = []
    for example in gold:
        best = _best_frames(res, example.utterance, cfg, top_k, wide_segments)[0]
        output.append((example.utterance, best))
    return evaluate(output, gold, score_defaults)
