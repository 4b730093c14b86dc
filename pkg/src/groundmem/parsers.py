"""Robust parsers for every structured model-output format the pipeline consumes.

All parsers are total: they return a value or raise a typed error, never
abort. Payloads may be surrounded by arbitrary prose or code fences; JSON
extraction scans for balanced brace/bracket spans and applies one repair
pass (fence and trailing-comma stripping) before strict parsing.
"""

from __future__ import annotations

import json
import re
from typing import Any, Iterator, Optional, Sequence

from .core import (
    Annotation,
    AtomicFact,
    EditAction,
    FactVerdict,
    JudgeOutcome,
    JudgeVerdict,
    ObserverDecision,
    Plan,
    PlanCommand,
    PlanStep,
    GroundMemError,
    UnknownLabel,
)


class UnparsableOutput(GroundMemError):
    """No recognizable payload in the raw completion."""


class UnknownAction(GroundMemError):
    """Observer action token outside {NEW, CONTINUE, SKIP}."""


class UnknownCommand(GroundMemError):
    """Plan step command outside {POV, RAG, PROCESS, FINAL_ANSWER}."""


class MalformedRagCount(GroundMemError):
    """RAG retrieval count is not a positive integer."""


class VerdictCountMismatch(GroundMemError):
    """Fact-checker returned a different number of verdicts than facts submitted."""


_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")


def _repair(text: str) -> str:
    text = re.sub(r"```[a-zA-Z]*", "", text)
    return _TRAILING_COMMA_RE.sub(r"\1", text)


def _balanced_spans(raw: str, open_ch: str, close_ch: str) -> Iterator[str]:
    """Yield top-level balanced spans of the given bracket pair, left to right."""
    depth = 0
    start = -1
    in_string = False
    escape = False
    for i, ch in enumerate(raw):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == open_ch:
            if depth == 0:
                start = i
            depth += 1
        elif ch == close_ch and depth > 0:
            depth -= 1
            if depth == 0:
                yield raw[start : i + 1]


def iter_json_values(raw: str, open_ch: str = "{", close_ch: str = "}") -> Iterator[Any]:
    cleaned = _repair(raw)
    for span in _balanced_spans(cleaned, open_ch, close_ch):
        try:
            yield json.loads(span)
        except json.JSONDecodeError:
            try:
                yield json.loads(_TRAILING_COMMA_RE.sub(r"\1", span))
            except json.JSONDecodeError:
                continue


def _first_object_with_keys(raw: str, keys: Sequence[str]) -> dict:
    for value in iter_json_values(raw):
        if isinstance(value, dict) and all(k in value for k in keys):
            return value
    raise UnparsableOutput(f"no JSON object with keys {list(keys)} in output")


def parse_observer_output(raw: str) -> ObserverDecision:
    """Extract the Observer JSON (frame_meta, relation, imagery, action)."""
    obj = _first_object_with_keys(raw, ["action"])
    token = str(obj.get("action", ""))
    try:
        action = EditAction.parse(token)
    except UnknownLabel:
        raise UnknownAction(f"unknown action token: {token!r}")
    imagery = str(obj.get("imagery", "") or "")
    relation = str(obj.get("relation", "") or "").strip()
    if action is EditAction.SKIP:
        imagery = ""
    elif not imagery.strip():
        raise UnparsableOutput(f"{action.value} decision with empty imagery")
    return ObserverDecision(
        action=action,
        scene_descriptor=imagery,
        metadata=str(obj.get("frame_meta", "") or ""),
        frame_meta=str(obj.get("frame_meta", "") or ""),
        relation_hint=relation or None,
    )


_ANSWER_SPAN_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL | re.IGNORECASE)
_ITEM_RE = re.compile(r"<item>(.*?)</item>", re.DOTALL | re.IGNORECASE)
_RAG_RE = re.compile(r"^RAG\[\s*(?:k\s*=\s*)?([^\]]*)\]", re.IGNORECASE)


def parse_planner_output(raw: str) -> Plan:
    """Parse the Planner's XML-like step list into a Plan.

    Validity (FINAL_ANSWER placement etc.) is checked separately by
    core.validate_plan.
    """
    m = _ANSWER_SPAN_RE.search(raw)
    if not m:
        raise UnparsableOutput("no <answer> span in planner output")
    items = [i.strip() for i in _ITEM_RE.findall(m.group(1))]
    items = [i for i in items if i]
    if not items:
        raise UnparsableOutput("planner <answer> span contains no <item> steps")
    steps = []
    for item in items:
        rag = _RAG_RE.match(item)
        if rag:
            count_text = rag.group(1).strip()
            try:
                count = int(count_text)
            except ValueError:
                raise MalformedRagCount(f"RAG count is not an integer: {count_text!r}")
            if count < 1:
                raise MalformedRagCount(f"RAG count must be positive: {count}")
            steps.append(
                PlanStep(PlanCommand.RAG, item[rag.end() :].strip(), retrieval_count=count)
            )
            continue
        head, _, rest = item.partition(" ")
        token = head.strip().upper()
        if token not in PlanCommand.__members__ or token == "RAG":
            raise UnknownCommand(f"unknown plan command: {head!r}")
        steps.append(PlanStep(PlanCommand[token], rest.strip()))
    return Plan(tuple(steps))


def parse_linker_output(raw: str) -> list[dict]:
    """Parse the Linker's `triplets` array into raw candidate dicts.

    Frame-id validation and predicate normalization are the linker module's
    job; this only recovers the JSON structure. An empty list is a valid
    answer.
    """
    obj = _first_object_with_keys(raw, ["triplets"])
    triplets = obj["triplets"]
    if not isinstance(triplets, list):
        raise UnparsableOutput("triplets is not a list")
    candidates = []
    for entry in triplets:
        if not isinstance(entry, dict) or not {"subject", "predicate", "object"} <= set(entry):
            raise UnparsableOutput(f"malformed triplet entry: {entry!r}")
        candidates.append(
            {
                "subject": str(entry["subject"]),
                "predicate": str(entry["predicate"]),
                "object": str(entry["object"]),
            }
        )
    return candidates


def parse_fact_checker_output(raw: str, facts: Sequence[AtomicFact]) -> list[FactVerdict]:
    """Parse the fact-checker's verdict array, matched positionally to `facts`."""
    entries: Optional[list] = None
    for value in iter_json_values(raw, "[", "]"):
        if isinstance(value, list) and all(
            isinstance(e, dict) and "fact" in e and "verdict" in e for e in value
        ):
            entries = value
            break
    if entries is None:
        raise UnparsableOutput("no verdict array in fact-checker output")
    if len(entries) != len(facts):
        raise VerdictCountMismatch(
            f"{len(facts)} facts submitted but {len(entries)} verdicts returned"
        )
    verdicts = []
    for fact, entry in zip(facts, entries):
        box = entry.get("box")
        if box is not None:
            if not (isinstance(box, list) and len(box) == 4):
                raise UnparsableOutput(f"malformed evidence box: {box!r}")
            box = tuple(int(v) for v in box)
        verdicts.append(FactVerdict(fact=fact, verdict=bool(entry["verdict"]), box=box))
    return verdicts


_REASONING_SPAN_RE = re.compile(
    r"<(reasoning|think)>(.*?)</\1>", re.DOTALL | re.IGNORECASE
)
_VERDICT_TOKEN_RE = re.compile(r"\b(same|different)\b", re.IGNORECASE)


def parse_judge_output(raw: str) -> JudgeVerdict:
    """Extract the Judge's SAME/DIFFERENT verdict and optional reasoning span."""
    answer_span = _ANSWER_SPAN_RE.search(raw)
    scope = answer_span.group(1) if answer_span else raw
    token = _VERDICT_TOKEN_RE.search(scope)
    if not token:
        raise UnparsableOutput("no SAME/DIFFERENT token in judge output")
    reasoning = _REASONING_SPAN_RE.search(raw)
    return JudgeVerdict(
        verdict=JudgeOutcome[token.group(1).upper()],
        reasoning=reasoning.group(2).strip() if reasoning else "",
    )


_ANNOTATION_KEYS = ("complexity_type", "question_type", "constraint_type", "validity_type")


def parse_annotator_output(raw: str) -> Annotation:
    """Parse the Annotator's four-way classification JSON."""
    obj = _first_object_with_keys(raw, _ANNOTATION_KEYS)
    return Annotation(
        complexity=str(obj["complexity_type"]).lower(),
        question_kind=str(obj["question_type"]).lower(),
        constraint=str(obj["constraint_type"]).lower(),
        validity=str(obj["validity_type"]).lower(),
    )


def parse_fact_list(raw: str) -> list[str]:
    """Parse the fact-decomposer's `facts` string list."""
    obj = _first_object_with_keys(raw, ["facts"])
    facts = obj["facts"]
    if not isinstance(facts, list) or not all(isinstance(f, str) for f in facts):
        raise UnparsableOutput("facts is not a list of strings")
    return facts


def parse_scene_output(raw: str) -> str:
    """Parse a Constructor/Summarizer `scene` payload."""
    obj = _first_object_with_keys(raw, ["scene"])
    scene = obj["scene"]
    if not isinstance(scene, str) or not scene.strip():
        raise UnparsableOutput("scene is empty or not a string")
    return scene


def extract_answer_span(raw: str) -> str:
    """Pull the final `<answer>` span out of a completion (empty if absent)."""
    m = _ANSWER_SPAN_RE.search(raw)
    return m.group(1).strip() if m else ""
