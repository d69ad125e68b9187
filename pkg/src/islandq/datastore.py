"""Tab-separated table loading, conjunctive query execution, slot scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DslSyntaxError, MisalignedCorpus, RaggedRow, UnknownAttribute
from .frames import EXTRACTED, FrameSchema, Query


def load_table(text: str) -> list[dict]:
    """First row is the header; cells are trimmed; blank lines ignored."""
    records = []
    header = None
    for line in text.splitlines():
        if line == "":
            continue
        cells = [c.strip() for c in line.split("\t")]
        if header is None:
            header = cells
        else:
            if len(cells) != len(header):
                raise RaggedRow(len(records) + 2)
            records.append(dict(zip(header, cells)))
    return records


def execute(query: Query, table: list[dict]) -> list[dict]:
    """Records matching every predicate case-insensitively, in table order."""
    if table:
        attributes = table[0].keys()
        for attr, _ in query.predicates:
            if attr not in attributes:
                raise UnknownAttribute(f"unknown attribute {attr}")
    return [
        r
        for r in table
        if all(r.get(attr, "").lower() == value.lower() for attr, value in query.predicates)
    ]


@dataclass(frozen=True)
class GoldExample:
    utterance: str
    frame: dict


def load_gold(text: str, schema: FrameSchema) -> list[GoldExample]:
    """JSON lines {"utterance": str, "frame": {slot: value}}."""
    known = schema.names()
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DslSyntaxError(line_no, f"bad JSON: {exc.msg}") from None
        if not isinstance(data, dict) or "utterance" not in data or "frame" not in data:
            raise DslSyntaxError(line_no, "expected object with utterance and frame")
        frame = data["frame"]
        if not isinstance(frame, dict):
            raise DslSyntaxError(line_no, "frame must be an object")
        for slot in frame:
            if slot not in known:
                raise DslSyntaxError(line_no, f"unknown slot {slot}")
        out.append(GoldExample(str(data["utterance"]), {k: str(v) for k, v in frame.items()}))
    return out


def _metrics(tp: int, fp: int, fn: int) -> dict:
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {"tp": tp, "fp": fp, "fn": fn, "precision": precision, "recall": recall, "f1": f1}


def evaluate(pipeline_output, gold: list[GoldExample], score_defaults: bool = False) -> dict:
    """Slot-level scoring of predicted frames against the gold corpus.

    An extracted slot is a true positive when its value matches gold
    case-insensitively, otherwise a false positive; gold slots with no
    matching extracted prediction are false negatives (a wrong value is both
    fp and fn, so tp+fn always equals the gold slot count).  Defaulted slots
    only count when score_defaults is set.
    """
    if len(pipeline_output) != len(gold):
        raise MisalignedCorpus(f"{len(pipeline_output)} predictions vs {len(gold)} gold examples")
    counts: dict[str, dict] = {}
    worst = []
    for index, ((utterance, frame), example) in enumerate(zip(pipeline_output, gold)):
        if utterance != example.utterance:
            raise MisalignedCorpus(f"example {index}: utterance mismatch")
        predicted = {
            slot: sv.value
            for slot, sv in frame.values.items()
            if score_defaults or sv.origin == EXTRACTED
        }
        errors = 0
        for slot, value in predicted.items():
            c = counts.setdefault(slot, {"tp": 0, "fp": 0, "fn": 0})
            if slot in example.frame and value.lower() == example.frame[slot].lower():
                c["tp"] += 1
            else:
                c["fp"] += 1
                errors += 1
        for slot, value in example.frame.items():
            c = counts.setdefault(slot, {"tp": 0, "fp": 0, "fn": 0})
            if slot not in predicted:
                c["fn"] += 1
                errors += 1
            elif predicted[slot].lower() != value.lower():
                # substitution: already an error via its fp, but still a miss
                c["fn"] += 1
        if errors:
            worst.append((errors, index, example.utterance))
    worst.sort(key=lambda t: (-t[0], t[1]))
    per_slot = {
        slot: _metrics(c["tp"], c["fp"], c["fn"]) for slot, c in sorted(counts.items())
    }
    micro = _metrics(
        sum(c["tp"] for c in counts.values()),
        sum(c["fp"] for c in counts.values()),
        sum(c["fn"] for c in counts.values()),
    )
    return {
        "per_slot": per_slot,
        "micro": micro,
        "examples": len(gold),
        "worst": [
            {"utterance": utterance, "errors": errors}
            for errors, _, utterance in worst[:5]
        ],
    }
