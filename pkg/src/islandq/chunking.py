"""Marker location, utterance segmentation, chunk extraction, hypotheses.

A marker named ``announcement_query`` (role separator) splits the utterance
into an announcement part and a query body; chunk categories are mined from
the query body only, unless the caller widens the segment.  Chunks per
category keep only the best-coverage, tightest-span edges, then the lattice
of chunk/marker/skip arcs is walked to enumerate every chunk combination
whose category sequence fits one of the declared orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .parser import Chart, ParseConfig, Span, maximal_coverage, minimal_spans

ANNOUNCEMENT_QUERY = "announcement_query"

CHUNK = "chunk"
MARKER = "marker"
SKIP = "skip"


@dataclass(frozen=True)
class MarkerOccurrence:
    marker: str
    role: str
    span: Span
    weight: float


@dataclass(frozen=True)
class Segment:
    kind: str  # "announcement" | "query_body" | "other"
    span: Span


@dataclass(frozen=True)
class Chunk:
    category: str
    edge_id: int
    weight: float
    span: Span
    text: str


@dataclass(frozen=True)
class LatticeArc:
    kind: str
    start: int
    end: int
    chunk: Chunk | None = None
    marker: MarkerOccurrence | None = None


@dataclass(frozen=True)
class HypothesisLattice:
    n: int
    arcs: tuple[LatticeArc, ...]
    allowed_orders: tuple


@dataclass(frozen=True)
class QueryHypothesis:
    chunks: tuple[Chunk, ...]
    weight: float
    # Index into allowed_orders; -1 for the fallback hypothesis.
    order_rule: int


def find_markers(g, tokens) -> list[MarkerOccurrence]:
    """All marker pattern occurrences, longest pattern per (marker, start)."""
    toks = tuple(tokens)
    n = len(toks)
    occs = []
    for decl_index, marker in enumerate(g.markers):
        for s in range(n):
            best = 0
            for pattern in marker.patterns:
                width = len(pattern)
                if width > best and toks[s : s + width] == pattern:
                    best = width
            if best:
                occs.append(
                    (s, -best, decl_index, MarkerOccurrence(marker.name, marker.role, Span(s, s + best), marker.weight))
                )
    occs.sort(key=lambda t: t[:3])
    return [o for _, _, _, o in occs]


def segment(tokens, occs: list[MarkerOccurrence]) -> list[Segment]:
    """Split at the first announcement_query separator; else one query body."""
    n = len(tokens)
    sep = None
    for occ in occs:
        if occ.role == "separator" and occ.marker == ANNOUNCEMENT_QUERY:
            if sep is None or occ.span.start < sep.span.start:
                sep = occ
    if sep is None:
        return [Segment("query_body", Span(0, n))]
    segs = []
    if sep.span.start > 0:
        segs.append(Segment("announcement", Span(0, sep.span.start)))
    if sep.span.end < n:
        segs.append(Segment("query_body", Span(sep.span.end, n)))
    return segs


def extract_chunks(chart: Chart, seg: Segment, chunk_cats, cfg: ParseConfig | None = None) -> list[Chunk]:
    """Best chunk edges per category inside the segment, sorted by position.

    A chunk's text is the covered tokens joined by spaces, so skipped tokens
    inside the span do not leak into slot values.
    """
    cfg = cfg or ParseConfig()
    n = chart.input_len
    out = []
    for cat_index, cat in enumerate(chunk_cats):
        edges = [
            e
            for e in chart.by_category(cat)
            if not e.zero_width
            and seg.span.start <= e.span.start
            and e.span.end <= seg.span.end
            and len(e.coverage) / n >= cfg.threshold
        ]
        for e in minimal_spans(maximal_coverage(edges)):
            text = " ".join(chart.tokens[i] for i in sorted(e.coverage))
            out.append((e.span.start, e.span.end, cat_index, e.id, Chunk(cat, e.id, e.weight, e.span, text)))
    out.sort(key=lambda t: t[:4])
    return [c for _, _, _, _, c in out]


def build_lattice(chunks, occs, orders, n: int) -> HypothesisLattice:
    """Nodes are token positions 0..n; every position gets a skip arc."""
    arcs = [LatticeArc(CHUNK, c.span.start, c.span.end, chunk=c) for c in chunks]
    arcs += [LatticeArc(MARKER, o.span.start, o.span.end, marker=o) for o in occs]
    arcs += [LatticeArc(SKIP, i, i + 1) for i in range(n)]
    return HypothesisLattice(n=n, arcs=tuple(arcs), allowed_orders=tuple(orders))


def _match_order(cats, order, i=0, j=0) -> bool:
    """True when cats equals order with some optional elements dropped."""
    if j == len(order):
        return i == len(cats)
    elem = order[j]
    if i < len(cats) and cats[i] == elem.category and _match_order(cats, order, i + 1, j + 1):
        return True
    return elem.optional and _match_order(cats, order, i, j + 1)


def _matching_order(cats, orders) -> int | None:
    for index, order in enumerate(orders):
        if _match_order(tuple(cats), order):
            return index
    return None


def enumerate_hypotheses(lat: HypothesisLattice, top_k: int, epsilon_weight: float = 0.1) -> list[QueryHypothesis]:
    """All order-conforming chunk combinations on full lattice paths, best
    first, truncated to top_k; one empty fallback hypothesis if none fit."""
    outgoing: dict[int, list[LatticeArc]] = {}
    for arc in lat.arcs:
        outgoing.setdefault(arc.start, []).append(arc)

    memo: dict[int, list[tuple]] = {lat.n: [()]}

    def suffixes(node: int) -> list[tuple]:
        if node in memo:
            return memo[node]
        found: dict[tuple, None] = {}
        for arc in outgoing.get(node, ()):
            for tail in suffixes(arc.end):
                combo = (arc.chunk,) + tail if arc.kind == CHUNK else tail
                found.setdefault(combo, None)
        memo[node] = list(found)
        return memo[node]

    hypotheses = []
    for combo in suffixes(0):
        order_index = _matching_order([c.category for c in combo], lat.allowed_orders)
        if order_index is None:
            continue
        weight = min(c.weight for c in combo) if combo else epsilon_weight
        hypotheses.append(QueryHypothesis(combo, weight, order_index))

    if not hypotheses:
        return [QueryHypothesis((), epsilon_weight, -1)]

    def sort_key(h: QueryHypothesis):
        first = h.chunks[0].span.start if h.chunks else math.inf
        shape = tuple((c.span.start, c.span.end, c.category, c.edge_id) for c in h.chunks)
        return (-h.weight, -len(h.chunks), first, shape, h.order_rule)

    hypotheses.sort(key=sort_key)
    return hypotheses[:top_k]
