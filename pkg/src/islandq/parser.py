"""Robust bottom-up island parsing over token streams.

Rules match their body elements left to right; each element after the first
must start within ``max_gap`` tokens of the previous element's end, while the
first element may start anywhere, so well-formed islands are found even in the
middle of noisy input.  Edges record exactly which token indices their
terminals consumed (the coverage set), separately from the contiguous span,
and carry the minimum of all static rule weights in their derivation.

Negated body elements are evaluated in a second phase against the frozen
phase-1 chart, which is what stratification buys: ``~c`` holds with zero width
at position p iff phase 1 produced no c edge starting in [p, p+max_gap].
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EdgeBudgetExceeded, InputLenZero
from .grammar import (
    EPSILON,
    NEGATION,
    NONTERMINAL,
    TERMINAL,
    Grammar,
    Rule,
    combine_weights,
    terminal,
)

# Punctuation becomes whitespace; apostrophes stay inside tokens so French
# elided forms survive as single tokens.
_PUNCT_RE = re.compile(r'[.,;:?!"]')


def tokenize(text: str) -> list[str]:
    """Lowercase, strip sentence punctuation, split on whitespace."""
    return _PUNCT_RE.sub(" ", text.lower()).split()


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Edge:
    id: int
    category: str
    span: Span
    coverage: frozenset
    weight: float
    rule_id: int
    children: tuple[int, ...]

    @property
    def zero_width(self) -> bool:
        return self.span.start == self.span.end


@dataclass(frozen=True)
class ParseConfig:
    max_gap: int = 3
    threshold: float = 0.0
    max_edges: int = 100000
    # Testing knob: disabling pruning keeps every non-duplicate edge.
    prune: bool = True


class Chart:
    """Edges over one token sequence, with dominated edges pruned.

    Per (category, span) an edge is dropped only when another edge there beats
    it on coverage size AND weight strictly; pruned edges stay resolvable by
    id so children links of surviving edges never dangle.
    """

    def __init__(self, tokens):
        self.tokens = tuple(tokens)
        self.input_len = len(self.tokens)
        self._registry: dict[int, Edge] = {}
        self._retained: set[int] = set()
        self._by_cat: dict[str, list[int]] = {}
        self._by_cat_start: dict[tuple[str, int], list[int]] = {}
        self._by_cat_span: dict[tuple[str, int, int], list[int]] = {}
        self._signatures: set = set()
        self._next_id = 0

    def edge(self, edge_id: int) -> Edge:
        return self._registry[edge_id]

    def edges(self) -> list[Edge]:
        """Retained edges in id order."""
        return [self._registry[i] for i in sorted(self._retained)]

    def by_category(self, category: str) -> list[Edge]:
        return [self._registry[i] for i in sorted(self._by_cat.get(category, ()))]

    def starts_by_category(self) -> dict[str, set]:
        out: dict[str, set] = {}
        for eid in self._retained:
            e = self._registry[eid]
            out.setdefault(e.category, set()).add(e.span.start)
        return out

    def _ids_at(self, category: str, start: int) -> list[int]:
        return self._by_cat_start.get((category, start), [])

    def _retire(self, edge_id: int) -> None:
        e = self._registry[edge_id]
        self._retained.discard(edge_id)
        self._by_cat[e.category].remove(edge_id)
        self._by_cat_start[(e.category, e.span.start)].remove(edge_id)
        self._by_cat_span[(e.category, e.span.start, e.span.end)].remove(edge_id)

    def _insert(self, category, span, coverage, weight, rule_id, children, cfg):
        sig = (category, span.start, span.end, coverage, weight)
        if sig in self._signatures:
            return None
        span_key = (category, span.start, span.end)
        here = self._by_cat_span.get(span_key, [])
        if cfg.prune:
            size = len(coverage)
            for other_id in here:
                other = self._registry[other_id]
                if len(other.coverage) > size and other.weight > weight:
                    return None
            for other_id in list(here):
                other = self._registry[other_id]
                if size > len(other.coverage) and weight > other.weight:
                    self._retire(other_id)
        edge = Edge(self._next_id, category, span, coverage, weight, rule_id, children)
        self._next_id += 1
        self._registry[edge.id] = edge
        self._signatures.add(sig)
        self._retained.add(edge.id)
        self._by_cat.setdefault(category, []).append(edge.id)
        self._by_cat_start.setdefault((category, span.start), []).append(edge.id)
        self._by_cat_span.setdefault(span_key, []).append(edge.id)
        if len(self._registry) > cfg.max_edges:
            raise EdgeBudgetExceeded(f"edge budget {cfg.max_edges} exceeded")
        return edge.id

    def dump(self) -> dict:
        return {
            "input": list(self.tokens),
            "edges": [
                {
                    "id": e.id,
                    "cat": e.category,
                    "start": e.span.start,
                    "end": e.span.end,
                    "covered": sorted(e.coverage),
                    "weight": e.weight,
                    "rule": e.rule_id,
                    "children": list(e.children),
                }
                for e in self.edges()
            ],
        }


def _marker_rules(g: Grammar) -> list[Rule]:
    """Markers joining the parse as pre-terminal rules; ids continue after g's."""
    out = []
    next_id = len(g.rules)
    for marker in g.markers:
        for pattern in marker.patterns:
            out.append(
                Rule(
                    id=next_id,
                    lhs=marker.name,
                    body=(terminal(pattern),),
                    static_weight=marker.weight,
                    is_preterminal=True,
                )
            )
            next_id += 1
    return out


def _has_kind(rule: Rule, kind: str) -> bool:
    return any(e.kind == kind for e in rule.body)


def _element_matches(elem, lo, hi, chart, neg_starts, max_gap):
    """Yield (child_id, coverage, weight, start, end) with start in [lo, hi]."""
    n = chart.input_len
    if elem.kind == TERMINAL:
        pattern = elem.pattern
        width = len(pattern)
        for s in range(lo, min(hi, n - width) + 1):
            if chart.tokens[s : s + width] == pattern:
                yield None, frozenset(range(s, s + width)), None, s, s + width
    elif elem.kind == NONTERMINAL:
        for s in range(lo, min(hi, n) + 1):
            for eid in chart._ids_at(elem.category, s):
                e = chart.edge(eid)
                yield eid, e.coverage, e.weight, s, e.span.end
    elif elem.kind == EPSILON:
        for p in range(lo, min(hi, n) + 1):
            yield None, frozenset(), None, p, p
    else:  # NEGATION, only enumerated when a phase-1 snapshot is available
        if neg_starts is None:
            return
        starts = neg_starts.get(elem.category, ())
        for p in range(lo, min(hi, n) + 1):
            if not any(p <= s <= p + max_gap for s in starts):
                yield None, frozenset(), None, p, p


def _rule_matchings(rule, chart, cfg, neg_starts):
    """Yield (first_start, end, children, coverage, weights) for admissible
    left-to-right matchings of the rule body."""
    body = rule.body

    def rec(i, prev_end, first_start, children, coverage, weights):
        if i == len(body):
            yield first_start, prev_end, tuple(children), coverage, tuple(weights)
            return
        if i == 0:
            lo, hi = 0, chart.input_len
        else:
            lo, hi = prev_end, prev_end + cfg.max_gap
        for child, cov, w, start, end in _element_matches(
            body[i], lo, hi, chart, neg_starts, cfg.max_gap
        ):
            if child is not None:
                children.append(child)
                weights.append(w)
            yield from rec(
                i + 1,
                end,
                start if i == 0 else first_start,
                children,
                coverage | cov,
                weights,
            )
            if child is not None:
                children.pop()
                weights.pop()

    yield from rec(0, 0, 0, [], frozenset(), [])


def parse(g: Grammar, tokens, cfg: ParseConfig | None = None) -> Chart:
    """Saturate a chart over the tokens; negation-free rules first, then rules
    with negation against the frozen intermediate chart."""
    cfg = cfg or ParseConfig()
    chart = Chart(tokens)
    all_rules = list(g.rules) + _marker_rules(g)
    plain = [r for r in all_rules if not _has_kind(r, NEGATION)]
    negated = [r for r in all_rules if _has_kind(r, NEGATION)]
    lhs_of = {r.id: r.lhs for r in all_rules}

    _saturate(chart, cfg, None, plain, plain, lhs_of)
    if negated:
        snapshot = chart.starts_by_category()
        _saturate(chart, cfg, snapshot, negated, all_rules, lhs_of)
    return chart


def _saturate(chart, cfg, neg_starts, first_rules, later_rules, lhs_of):
    """Run matching rounds until no new edge appears.

    The first round enumerates first_rules unconditionally; every later round
    enumerates later_rules but keeps only matchings that use at least one edge
    inserted by the previous round (older combinations already exist and would
    be dropped as duplicates anyway)."""
    new_ids: set | None = None
    rules = first_rules
    while True:
        candidates = []
        for rule in rules:
            if new_ids is not None and not _has_kind(rule, NONTERMINAL):
                continue
            for start, end, children, coverage, child_ws in _rule_matchings(
                rule, chart, cfg, neg_starts
            ):
                if new_ids is not None and not any(c in new_ids for c in children):
                    continue
                weight = combine_weights((rule.static_weight,) + child_ws)
                candidates.append(
                    (
                        start,
                        rule.id,
                        end,
                        tuple(sorted(coverage)),
                        -weight,
                        children,
                        coverage,
                        weight,
                    )
                )
        candidates.sort(key=lambda c: c[:6])
        inserted = set()
        for start, rule_id, end, _, _, children, coverage, weight in candidates:
            eid = chart._insert(
                category=lhs_of[rule_id],
                span=Span(start, end),
                coverage=coverage,
                weight=weight,
                rule_id=rule_id,
                children=children,
                cfg=cfg,
            )
            if eid is not None:
                inserted.add(eid)
        if not inserted:
            return
        new_ids = inserted
        rules = later_rules


def analyses(chart: Chart, category: str, cfg: ParseConfig | None = None) -> list[Edge]:
    """Edges of the category at or above the coverage-ratio threshold, best
    first: more coverage, then higher weight, then tighter span, then id."""
    cfg = cfg or ParseConfig()
    n = chart.input_len
    if n == 0:
        return []
    out = [e for e in chart.by_category(category) if len(e.coverage) / n >= cfg.threshold]
    out.sort(key=lambda e: (-len(e.coverage), -e.weight, e.span.length, e.id))
    return out


def maximal_coverage(es: list[Edge]) -> list[Edge]:
    """Edges whose coverage count is maximal; order preserved."""
    if not es:
        return []
    best = max(len(e.coverage) for e in es)
    return [e for e in es if len(e.coverage) == best]


def minimal_spans(es: list[Edge]) -> list[Edge]:
    """Edges whose span length is minimal; order preserved."""
    if not es:
        return []
    best = min(e.span.length for e in es)
    return [e for e in es if e.span.length == best]


def maximal_threshold(es: list[Edge], input_len: int) -> list[Edge]:
    """Edges attaining the maximum coverage ratio over the input."""
    if not es:
        return []
    if input_len == 0:
        raise InputLenZero("coverage ratio undefined for empty input")
    # One shared denominator, so the max ratio is the max coverage count.
    best = max(len(e.coverage) for e in es)
    return [e for e in es if len(e.coverage) == best]


def unattached_constituents(chart: Chart, roots: list[Edge]) -> list[Edge]:
    """Retained non-epsilon edges not reachable from any root via children."""
    reachable: set[int] = set()
    stack = [r.id for r in roots]
    while stack:
        eid = stack.pop()
        if eid in reachable:
            continue
        reachable.add(eid)
        stack.extend(chart.edge(eid).children)
    out = [e for e in chart.edges() if e.id not in reachable and not e.zero_width]
    out.sort(key=lambda e: (e.span.start, e.id))
    return out
