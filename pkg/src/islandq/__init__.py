"""Robust weighted island parsing and query-frame pipeline."""

from .chunking import (
    Chunk,
    HypothesisLattice,
    MarkerOccurrence,
    QueryHypothesis,
    Segment,
    build_lattice,
    enumerate_hypotheses,
    extract_chunks,
    find_markers,
    segment,
)
from .datastore import GoldExample, evaluate, execute, load_gold, load_table
from .frames import (
    Frame,
    FrameSchema,
    KnowledgeBase,
    Query,
    check_consistency,
    complete_frame,
    frames_from_hypotheses,
    linearize,
    load_kb,
    load_schema,
    resolve_default,
    select_best,
    to_query,
)
from .grammar import Grammar, Rule, combine_weights, load_grammar, render_grammar, validate_grammar
from .parser import (
    Chart,
    Edge,
    ParseConfig,
    Span,
    analyses,
    maximal_coverage,
    maximal_threshold,
    minimal_spans,
    parse,
    tokenize,
    unattached_constituents,
)
from .pipeline import Resources, load_resources, run_chunk, run_eval, run_parse, run_query

__all__ = [
    "Chart",
    "Chunk",
    "Edge",
    "Frame",
    "FrameSchema",
    "GoldExample",
    "Grammar",
    "HypothesisLattice",
    "KnowledgeBase",
    "MarkerOccurrence",
    "ParseConfig",
    "Query",
    "QueryHypothesis",
    "Resources",
    "Rule",
    "Segment",
    "Span",
    "analyses",
    "build_lattice",
    "check_consistency",
    "combine_weights",
    "complete_frame",
    "enumerate_hypotheses",
    "evaluate",
    "execute",
    "extract_chunks",
    "find_markers",
    "frames_from_hypotheses",
    "linearize",
    "load_gold",
    "load_grammar",
    "load_kb",
    "load_resources",
    "load_schema",
    "load_table",
    "maximal_coverage",
    "maximal_threshold",
    "minimal_spans",
    "parse",
    "render_grammar",
    "resolve_default",
    "run_chunk",
    "run_eval",
    "run_parse",
    "run_query",
    "segment",
    "select_best",
    "to_query",
    "tokenize",
    "unattached_constituents",
    "validate_grammar",
]
