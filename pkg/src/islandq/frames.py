"""Query frames: slot filling from hypotheses, constraint checking, defaults.

The knowledge base is a DAG of named theories.  Lookup order is a depth-first
left-to-right walk keeping the first occurrence of each theory, so a theory's
own entries shadow its parents and earlier parents shadow later ones.
Defaults fill schema slots the utterance left open; defaulted slots get a
fixed confidence and never move the frame weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import (
    CycleError,
    DanglingParent,
    DslSyntaxError,
    InconsistentFrame,
    UnmappedCategory,
)

EXTRACTED = "extracted"
DEFAULTED = "defaulted"


@dataclass(frozen=True)
class SlotSpec:
    name: str
    db_attribute: str
    required: bool
    source_category: str


@dataclass(frozen=True)
class FrameSchema:
    slots: tuple[SlotSpec, ...]

    def slot_for_category(self, category: str) -> SlotSpec | None:
        for slot in self.slots:
            if slot.source_category == category:
                return slot
        return None

    def names(self) -> set:
        return {s.name for s in self.slots}


def load_schema(source_text: str) -> FrameSchema:
    """Schema JSON: {"slots": [{name, db_attribute, required, source_category}]}."""
    try:
        data = json.loads(source_text)
    except json.JSONDecodeError as exc:
        raise DslSyntaxError(exc.lineno, f"schema is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict) or not isinstance(data.get("slots"), list):
        raise DslSyntaxError(0, "schema must be an object with a slots array")
    slots = []
    for i, raw in enumerate(data["slots"]):
        try:
            slot = SlotSpec(
                name=str(raw["name"]),
                db_attribute=str(raw["db_attribute"]),
                required=bool(raw["required"]),
                source_category=str(raw["source_category"]),
            )
        except (TypeError, KeyError) as exc:
            raise DslSyntaxError(0, f"slot {i}: missing field {exc}") from None
        slots.append(slot)
    names = [s.name for s in slots]
    if len(set(names)) != len(names):
        raise DslSyntaxError(0, "duplicate slot name")
    sources = [s.source_category for s in slots]
    if len(set(sources)) != len(sources):
        raise DslSyntaxError(0, "two slots share one source category")
    return FrameSchema(tuple(slots))


@dataclass(frozen=True)
class Constraint:
    id: str
    kind: str  # "incompatible" | "requires"
    slot_a: str
    value_a: str
    slot_b: str
    values_b: tuple[str, ...]


@dataclass(frozen=True)
class Theory:
    name: str
    parents: tuple[str, ...]
    defaults: dict = field(default_factory=dict)
    constraints: tuple[Constraint, ...] = ()


@dataclass(frozen=True)
class KnowledgeBase:
    theories: dict
    context: str


def _parse_eq(token: str, line_no: int) -> tuple[str, str]:
    if "=" not in token:
        raise DslSyntaxError(line_no, f"expected slot=value, got {token!r}")
    slot, _, value = token.partition("=")
    if not slot or not value:
        raise DslSyntaxError(line_no, f"expected slot=value, got {token!r}")
    return slot, value


def load_kb(source_text: str) -> KnowledgeBase:
    """Parse the theory/default/constraint format and check the DAG."""
    theories: dict[str, Theory] = {}
    current: str | None = None
    context: str | None = None

    for line_no, raw in enumerate(source_text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indented = raw[: len(raw) - len(raw.lstrip())] != ""
        tokens = stripped.split()

        if not indented and tokens[0] == "context":
            if len(tokens) != 2:
                raise DslSyntaxError(line_no, "usage: context <name>")
            if context is not None:
                raise DslSyntaxError(line_no, "duplicate context declaration")
            context = tokens[1]

        elif not indented and tokens[0] == "theory":
            if len(tokens) < 2:
                raise DslSyntaxError(line_no, "usage: theory <name> [parents <p> ...]")
            name = tokens[1]
            if name in theories:
                raise DslSyntaxError(line_no, f"duplicate theory {name}")
            parents: tuple[str, ...] = ()
            if len(tokens) > 2:
                if tokens[2] != "parents" or len(tokens) == 3:
                    raise DslSyntaxError(line_no, "usage: theory <name> [parents <p> ...]")
                parents = tuple(tokens[3:])
            theories[name] = Theory(name=name, parents=parents)
            current = name

        elif indented and tokens[0] == "default":
            if current is None:
                raise DslSyntaxError(line_no, "default outside a theory")
            head, sep, value = stripped.partition("=")
            head_tokens = head.split()
            if not sep or len(head_tokens) != 2 or head_tokens[0] != "default":
                raise DslSyntaxError(line_no, "usage: default <slot> = <value>")
            value = value.strip()
            if not value:
                raise DslSyntaxError(line_no, "empty default value")
            theories[current].defaults[head_tokens[1]] = value

        elif indented and tokens[0] == "constraint":
            if current is None:
                raise DslSyntaxError(line_no, "constraint outside a theory")
            theory = theories[current]
            cid = f"{current}.c{len(theory.constraints)}"
            if len(tokens) >= 2 and tokens[1] == "incompatible":
                if len(tokens) != 4:
                    raise DslSyntaxError(line_no, "usage: constraint incompatible <s>=<v> <s2>=<v2>")
                slot_a, value_a = _parse_eq(tokens[2], line_no)
                slot_b, value_b = _parse_eq(tokens[3], line_no)
                constraint = Constraint(cid, "incompatible", slot_a, value_a, slot_b, (value_b,))
            elif len(tokens) >= 2 and tokens[1] == "requires":
                if "->" not in tokens:
                    raise DslSyntaxError(line_no, "usage: constraint requires <s>=<v> -> <s2> in {v,...}")
                arrow = tokens.index("->")
                if arrow != 3 or len(tokens) < arrow + 3 or tokens[arrow + 2] != "in":
                    raise DslSyntaxError(line_no, "usage: constraint requires <s>=<v> -> <s2> in {v,...}")
                slot_a, value_a = _parse_eq(tokens[2], line_no)
                slot_b = tokens[arrow + 1]
                values_raw = " ".join(tokens[arrow + 3 :])
                if not (values_raw.startswith("{") and values_raw.endswith("}")):
                    raise DslSyntaxError(line_no, "requires value set must be {v,...}")
                values = tuple(v.strip() for v in values_raw[1:-1].split(",") if v.strip())
                if not values:
                    raise DslSyntaxError(line_no, "empty requires value set")
                constraint = Constraint(cid, "requires", slot_a, value_a, slot_b, values)
            else:
                raise DslSyntaxError(line_no, "unknown constraint form")
            theories[current] = replace(theory, constraints=theory.constraints + (constraint,))

        else:
            raise DslSyntaxError(line_no, f"unrecognized line {stripped!r}")

    if context is None:
        raise DslSyntaxError(0, "missing context declaration")
    if context not in theories:
        raise DanglingParent(f"context {context} is not a defined theory")
    for theory in theories.values():
        for parent in theory.parents:
            if parent not in theories:
                raise DanglingParent(f"theory {theory.name}: unknown parent {parent}")
    _check_acyclic(theories)
    return KnowledgeBase(theories=theories, context=context)


def _check_acyclic(theories: dict) -> None:
    state: dict[str, int] = {}  # 1 = visiting, 2 = done

    def visit(name: str, trail):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise CycleError("inheritance cycle: " + " -> ".join(trail + [name]))
        state[name] = 1
        for parent in theories[name].parents:
            visit(parent, trail + [name])
        state[name] = 2

    for name in sorted(theories):
        visit(name, [])


def linearize(kb: KnowledgeBase, theory: str) -> list[str]:
    """Depth-first left-to-right ancestor order, first occurrence kept."""
    out: list[str] = []

    def visit(name: str) -> None:
        if name in out:
            return
        out.append(name)
        for parent in kb.theories[name].parents:
            visit(parent)

    visit(theory)
    return out


def resolve_default(kb: KnowledgeBase, theory: str, slot: str):
    """Value from the first theory in linearize order defining the slot."""
    for name in linearize(kb, theory):
        defaults = kb.theories[name].defaults
        if slot in defaults:
            return defaults[slot]
    return None


@dataclass(frozen=True)
class SlotValue:
    value: str
    confidence: float
    origin: str


@dataclass(frozen=True)
class Frame:
    values: dict
    weight: float
    consistent: bool = True
    violations: tuple[str, ...] = ()


def frames_from_hypotheses(hyps, schema: FrameSchema, epsilon_weight: float = 0.1) -> list[Frame]:
    """One frame per hypothesis; within a hypothesis the higher-confidence
    chunk wins a contested slot, the earlier one on equal confidence."""
    frames = []
    for hyp in hyps:
        values: dict[str, SlotValue] = {}
        for chunk in hyp.chunks:
            slot = schema.slot_for_category(chunk.category)
            if slot is None:
                raise UnmappedCategory(f"no schema slot for category {chunk.category}")
            cur = values.get(slot.name)
            if cur is None or chunk.weight > cur.confidence:
                values[slot.name] = SlotValue(chunk.text, chunk.weight, EXTRACTED)
        if values:
            weight = min(sv.confidence for sv in values.values())
        else:
            weight = epsilon_weight
        frames.append(Frame(values=values, weight=weight))
    return frames


def check_consistency(f: Frame, kb: KnowledgeBase) -> Frame:
    """Evaluate every constraint of every theory visible from the context.

    Comparison is case-insensitive; a constraint mentioning an absent slot is
    vacuously satisfied."""
    have = {slot: sv.value.lower() for slot, sv in f.values.items()}
    violations = []
    for name in linearize(kb, kb.context):
        for c in kb.theories[name].constraints:
            if have.get(c.slot_a) != c.value_a.lower():
                continue
            if c.slot_b not in have:
                continue
            if c.kind == "incompatible":
                if have[c.slot_b] == c.values_b[0].lower():
                    violations.append(c.id)
            else:  # requires
                if have[c.slot_b] not in {v.lower() for v in c.values_b}:
                    violations.append(c.id)
    return replace(f, consistent=not violations, violations=tuple(violations))


def complete_frame(f: Frame, kb: KnowledgeBase, schema: FrameSchema, default_confidence: float = 0.5) -> Frame:
    """Fill open slots from context defaults; weight untouched; re-check."""
    values = dict(f.values)
    for slot in schema.slots:
        if slot.name in values:
            continue
        default = resolve_default(kb, kb.context, slot.name)
        if default is not None:
            values[slot.name] = SlotValue(default, default_confidence, DEFAULTED)
    return check_consistency(replace(f, values=values), kb)


def select_best(frames, schema: FrameSchema, top_k: int):
    """Stable order: consistent first, then more required slots extracted,
    then weight, then more slots extracted overall."""
    required = {s.name for s in schema.slots if s.required}

    def extracted(f: Frame):
        return [slot for slot, sv in f.values.items() if sv.origin == EXTRACTED]

    def key(f: Frame):
        got = extracted(f)
        return (
            not f.consistent,
            -len([s for s in got if s in required]),
            -f.weight,
            -len(got),
        )

    return sorted(frames, key=key)[:top_k]


@dataclass(frozen=True)
class Query:
    predicates: tuple[tuple[str, str], ...]

    def render(self) -> str:
        return " AND ".join(f'{attr}="{value}"' for attr, value in self.predicates)


def to_query(f: Frame, schema: FrameSchema) -> Query:
    """Conjunctive equality query over filled slots with a database attribute,
    in schema order."""
    if not f.consistent:
        raise InconsistentFrame("; ".join(f.violations) or "frame is inconsistent")
    predicates = tuple(
        (slot.db_attribute, f.values[slot.name].value)
        for slot in schema.slots
        if slot.name in f.values and slot.db_attribute
    )
    return Query(predicates)
