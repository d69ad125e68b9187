"""Weighted grammar: declarative rule/marker/order DSL, validation, rendering.

The grammar file is line oriented (UTF-8, ``#`` starts a comment):

    start <category>
    term <category> <weight> : "<tok ...>" ( | "<tok ...>" )*
    rule <category> [<weight>] -> <elem>+
    marker separator <name> <weight> : "<tok ...>" ( | "<tok ...>" )*
    marker introducer <name> <weight> : "<tok ...>" ( | "<tok ...>" )*
    order <category>[?] <category>[?] ...

A rule body element is a category name, ``~category`` (negation), ``eps``,
a quoted inline terminal, or ``category!`` (head mark).  Weights are decimal
literals in [0, 1]; rule confidences combine by taking the minimum.  Each
``term`` alternative becomes its own pre-terminal rule so that rule ids follow
file order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DslSyntaxError, GrammarValidationError

Weight = float

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_LINE_TOKEN_RE = re.compile(r'"([^"]*)"|(\S+)')

NONTERMINAL = "nonterminal"
TERMINAL = "terminal"
NEGATION = "negation"
EPSILON = "epsilon"


@dataclass(frozen=True)
class BodyElement:
    """One element of a rule body."""

    kind: str
    category: str | None = None
    pattern: tuple[str, ...] | None = None
    head: bool = False


def nonterminal(category: str, head: bool = False) -> BodyElement:
    return BodyElement(NONTERMINAL, category=category, head=head)


def terminal(pattern) -> BodyElement:
    return BodyElement(TERMINAL, pattern=tuple(pattern))


def negation(category: str) -> BodyElement:
    return BodyElement(NEGATION, category=category)


def epsilon() -> BodyElement:
    return BodyElement(EPSILON)


@dataclass(frozen=True)
class Rule:
    id: int
    lhs: str
    body: tuple[BodyElement, ...]
    static_weight: Weight = 1.0
    is_preterminal: bool = False
    # True when the weight was written in the source (pre-terminals must).
    weight_explicit: bool = True


@dataclass(frozen=True)
class MarkerDecl:
    role: str  # "separator" | "introducer"
    name: str
    patterns: tuple[tuple[str, ...], ...]
    weight: Weight


@dataclass(frozen=True)
class OrderElement:
    category: str
    optional: bool = False


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning"
    message: str


@dataclass
class Grammar:
    rules: tuple[Rule, ...]
    markers: tuple[MarkerDecl, ...]
    start: str
    orders: tuple[tuple[OrderElement, ...], ...] = ()
    category_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.category_index:
            index: dict[str, tuple[int, ...]] = {}
            for rule in self.rules:
                index[rule.lhs] = index.get(rule.lhs, ()) + (rule.id,)
            self.category_index = index

    def chunk_categories(self) -> tuple[str, ...]:
        """Categories named in ``order`` lines, in first-appearance order."""
        seen: list[str] = []
        for order in self.orders:
            for elem in order:
                if elem.category not in seen:
                    seen.append(elem.category)
        return tuple(seen)

    def marker_names(self) -> set[str]:
        return {m.name for m in self.markers}


def combine_weights(ws) -> Weight:
    """Combine confidences with the minimum operator."""
    ws = list(ws)
    if not ws:
        raise ValueError("cannot combine an empty list of weights")
    for w in ws:
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"weight out of range: {w}")
    return min(ws)


def _split_tokens(line: str) -> list[tuple[bool, str]]:
    """Split a DSL line into (quoted?, text) pairs, dropping a trailing comment."""
    out = []
    for m in _LINE_TOKEN_RE.finditer(line):
        quoted, bare = m.group(1), m.group(2)
        if bare is not None and bare.startswith("#"):
            break
        if quoted is not None:
            out.append((True, quoted))
        else:
            out.append((False, bare))
    return out


def _require_ident(name: str, line_no: int) -> str:
    if not _IDENT_RE.match(name):
        raise DslSyntaxError(line_no, f"invalid identifier {name!r}")
    return name


def _parse_weight(text: str, line_no: int) -> Weight:
    try:
        w = float(text)
    except ValueError:
        raise DslSyntaxError(line_no, f"expected weight, got {text!r}") from None
    if not 0.0 <= w <= 1.0:
        raise DslSyntaxError(line_no, f"weight out of range: {text}")
    return w


def _parse_patterns(parts: list[tuple[bool, str]], line_no: int) -> list[tuple[str, ...]]:
    """Parse `"a b" | "c"` alternatives after the `:` of a term/marker line."""
    patterns: list[tuple[str, ...]] = []
    expect_pattern = True
    for quoted, text in parts:
        if expect_pattern:
            if not quoted:
                raise DslSyntaxError(line_no, f"expected quoted pattern, got {text!r}")
            toks = tuple(text.split())
            if not toks:
                raise DslSyntaxError(line_no, "empty pattern")
            patterns.append(toks)
            expect_pattern = False
        else:
            if quoted or text != "|":
                raise DslSyntaxError(line_no, f"expected '|' between patterns, got {text!r}")
            expect_pattern = True
    if expect_pattern or not patterns:
        raise DslSyntaxError(line_no, "missing pattern")
    return patterns


def _parse_body(parts: list[tuple[bool, str]], line_no: int) -> tuple[BodyElement, ...]:
    body: list[BodyElement] = []
    for quoted, text in parts:
        if quoted:
            toks = tuple(text.split())
            if not toks:
                raise DslSyntaxError(line_no, "empty inline terminal")
            body.append(terminal(toks))
        elif text == "eps":
            body.append(epsilon())
        elif text.startswith("~"):
            body.append(negation(_require_ident(text[1:], line_no)))
        elif text.endswith("!"):
            body.append(nonterminal(_require_ident(text[:-1], line_no), head=True))
        else:
            body.append(nonterminal(_require_ident(text, line_no)))
    if not body:
        raise DslSyntaxError(line_no, "empty rule body")
    if sum(1 for e in body if e.head) > 1:
        raise DslSyntaxError(line_no, "more than one head-marked element")
    return tuple(body)


def load_grammar(source_text: str) -> Grammar:
    """Parse the grammar DSL and validate the result.

    Raises DslSyntaxError on malformed lines and GrammarValidationError when
    the parsed grammar breaks a structural invariant.
    """
    rules: list[Rule] = []
    markers: list[MarkerDecl] = []
    orders: list[tuple[OrderElement, ...]] = []
    start: str | None = None

    for line_no, raw in enumerate(source_text.splitlines(), start=1):
        parts = _split_tokens(raw)
        if not parts:
            continue
        quoted, keyword = parts[0]
        if quoted:
            raise DslSyntaxError(line_no, "line cannot start with a pattern")

        if keyword == "start":
            if len(parts) != 2 or parts[1][0]:
                raise DslSyntaxError(line_no, "usage: start <category>")
            if start is not None:
                raise DslSyntaxError(line_no, "duplicate start declaration")
            start = _require_ident(parts[1][1], line_no)

        elif keyword == "term":
            if len(parts) < 5 or parts[1][0] or parts[2][0] or parts[3] != (False, ":"):
                raise DslSyntaxError(line_no, 'usage: term <category> <weight> : "<tok ...>"')
            lhs = _require_ident(parts[1][1], line_no)
            weight = _parse_weight(parts[2][1], line_no)
            for pattern in _parse_patterns(parts[4:], line_no):
                rules.append(
                    Rule(
                        id=len(rules),
                        lhs=lhs,
                        body=(terminal(pattern),),
                        static_weight=weight,
                        is_preterminal=True,
                    )
                )

        elif keyword == "rule":
            if len(parts) < 2 or parts[1][0]:
                raise DslSyntaxError(line_no, "usage: rule <category> [<weight>] -> <elem>+")
            lhs = _require_ident(parts[1][1], line_no)
            rest = parts[2:]
            weight, explicit = 1.0, False
            if rest and not rest[0][0] and rest[0][1] != "->":
                weight = _parse_weight(rest[0][1], line_no)
                explicit = True
                rest = rest[1:]
            if not rest or rest[0] != (False, "->"):
                raise DslSyntaxError(line_no, "missing '->' in rule")
            body = _parse_body(rest[1:], line_no)
            rules.append(
                Rule(
                    id=len(rules),
                    lhs=lhs,
                    body=body,
                    static_weight=weight,
                    weight_explicit=explicit,
                )
            )

        elif keyword == "marker":
            if (
                len(parts) < 6
                or parts[1][0]
                or parts[1][1] not in ("separator", "introducer")
                or parts[2][0]
                or parts[3][0]
                or parts[4] != (False, ":")
            ):
                raise DslSyntaxError(
                    line_no, 'usage: marker separator|introducer <name> <weight> : "<tok ...>"'
                )
            role = parts[1][1]
            name = _require_ident(parts[2][1], line_no)
            weight = _parse_weight(parts[3][1], line_no)
            patterns = _parse_patterns(parts[5:], line_no)
            markers.append(MarkerDecl(role=role, name=name, patterns=tuple(patterns), weight=weight))

        elif keyword == "order":
            elems: list[OrderElement] = []
            for q, text in parts[1:]:
                if q:
                    raise DslSyntaxError(line_no, "order elements are category names")
                if text.endswith("?"):
                    elems.append(OrderElement(_require_ident(text[:-1], line_no), optional=True))
                else:
                    elems.append(OrderElement(_require_ident(text, line_no)))
            if not elems:
                raise DslSyntaxError(line_no, "empty order declaration")
            orders.append(tuple(elems))

        else:
            raise DslSyntaxError(line_no, f"unknown declaration {keyword!r}")

    if start is None:
        raise DslSyntaxError(0, "missing start declaration")

    grammar = Grammar(rules=tuple(rules), markers=tuple(markers), start=start, orders=tuple(orders))
    errors = [d for d in validate_grammar(grammar) if d.level == "error"]
    if errors:
        raise GrammarValidationError(errors)
    return grammar


def validate_grammar(g: Grammar) -> list[Diagnostic]:
    """Return all invariant violations; warnings do not block loading."""
    diags: list[Diagnostic] = []
    defined = set(g.category_index)
    marker_names = g.marker_names()

    for name in sorted(defined & marker_names):
        diags.append(Diagnostic("error", f"category {name} defined as both rule and marker"))

    for rule in g.rules:
        if not rule.body:
            diags.append(Diagnostic("error", f"rule {rule.id}: empty body"))
        if not 0.0 <= rule.static_weight <= 1.0:
            diags.append(Diagnostic("error", f"rule {rule.id}: weight out of range"))
        if rule.is_preterminal:
            if any(e.kind != TERMINAL for e in rule.body):
                diags.append(
                    Diagnostic("error", f"rule {rule.id}: pre-terminal body must be terminal-only")
                )
            if not rule.weight_explicit:
                diags.append(
                    Diagnostic("error", f"rule {rule.id}: pre-terminal weight must be explicit")
                )
        if sum(1 for e in rule.body if e.head) > 1:
            diags.append(Diagnostic("error", f"rule {rule.id}: more than one head element"))
        for elem in rule.body:
            if elem.kind == TERMINAL and not elem.pattern:
                diags.append(Diagnostic("error", f"rule {rule.id}: empty terminal pattern"))

    # Undefined references: body categories may be rules or markers.
    referenced: dict[str, str] = {}
    for rule in g.rules:
        for elem in rule.body:
            if elem.kind in (NONTERMINAL, NEGATION):
                referenced.setdefault(elem.category, f"rule {rule.id}")
    for order in g.orders:
        for elem in order:
            referenced.setdefault(elem.category, "order declaration")
    for cat in sorted(referenced):
        if cat not in defined and cat not in marker_names:
            diags.append(Diagnostic("error", f"undefined category {cat}"))

    if g.start not in defined:
        diags.append(Diagnostic("error", f"start category {g.start} undefined"))

    diags.extend(_negation_cycles(g))
    diags.extend(_unreachable(g, defined, marker_names))
    return diags


def _negation_cycles(g: Grammar) -> list[Diagnostic]:
    """Error for every category on a dependency cycle that crosses a negation."""
    succ: dict[str, set[str]] = {}
    neg_edges: list[tuple[str, str]] = []
    for rule in g.rules:
        for elem in rule.body:
            if elem.kind in (NONTERMINAL, NEGATION):
                succ.setdefault(rule.lhs, set()).add(elem.category)
                succ.setdefault(elem.category, set())
                if elem.kind == NEGATION:
                    neg_edges.append((rule.lhs, elem.category))
    if not neg_edges:
        return []

    scc = _strongly_connected(succ)
    bad = set()
    for src, dst in neg_edges:
        if scc.get(src) is not None and scc.get(src) == scc.get(dst):
            bad.add(dst)
    return [Diagnostic("error", f"negation cycle through {cat}") for cat in sorted(bad)]


def _strongly_connected(succ: dict[str, set[str]]) -> dict[str, int]:
    """Iterative Tarjan; maps each node to its component id (singletons get a
    component only when they have a self-loop)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comp: dict[str, int] = {}
    counter = [0]
    comp_id = [0]

    for root in sorted(succ):
        if root in index:
            continue
        work = [(root, iter(sorted(succ[root])))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(succ[nxt]))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                members = []
                while True:
                    m = stack.pop()
                    on_stack.discard(m)
                    members.append(m)
                    if m == node:
                        break
                if len(members) > 1 or node in succ.get(node, set()):
                    for m in members:
                        comp[m] = comp_id[0]
                    comp_id[0] += 1
    return comp


def _unreachable(g: Grammar, defined: set, marker_names: set) -> list[Diagnostic]:
    """Warn about rule categories not reachable from the start or an order root."""
    roots = [g.start] + [e.category for order in g.orders for e in order]
    body_refs: dict[str, list[str]] = {}
    for rule in g.rules:
        refs = body_refs.setdefault(rule.lhs, [])
        for elem in rule.body:
            if elem.kind in (NONTERMINAL, NEGATION):
                refs.append(elem.category)
    seen: set[str] = set()
    frontier = [r for r in roots if r in defined]
    while frontier:
        cat = frontier.pop()
        if cat in seen:
            continue
        seen.add(cat)
        for ref in body_refs.get(cat, []):
            if ref in defined and ref not in seen:
                frontier.append(ref)
    return [
        Diagnostic("warning", f"unreachable: {cat}")
        for cat in sorted(defined - seen)
    ]


def _format_weight(w: Weight) -> str:
    return repr(float(w))


def _format_pattern(pattern: tuple[str, ...]) -> str:
    return '"' + " ".join(pattern) + '"'


def _format_element(elem: BodyElement) -> str:
    if elem.kind == TERMINAL:
        return _format_pattern(elem.pattern)
    if elem.kind == EPSILON:
        return "eps"
    if elem.kind == NEGATION:
        return "~" + elem.category
    return elem.category + ("!" if elem.head else "")


def render_grammar(g: Grammar) -> str:
    """Debug printer; re-loading its output reproduces the same Grammar value."""
    lines = [f"start {g.start}"]
    for rule in g.rules:
        if rule.is_preterminal:
            pats = " | ".join(_format_pattern(e.pattern) for e in rule.body)
            lines.append(f"term {rule.lhs} {_format_weight(rule.static_weight)} : {pats}")
        else:
            weight = f" {_format_weight(rule.static_weight)}" if rule.weight_explicit else ""
            body = " ".join(_format_element(e) for e in rule.body)
            lines.append(f"rule {rule.lhs}{weight} -> {body}")
    for marker in g.markers:
        pats = " | ".join(_format_pattern(p) for p in marker.patterns)
        lines.append(
            f"marker {marker.role} {marker.name} {_format_weight(marker.weight)} : {pats}"
        )
    for order in g.orders:
        elems = " ".join(e.category + ("?" if e.optional else "") for e in order)
        lines.append(f"order {elems}")
    return "\n".join(lines) + "\n"
