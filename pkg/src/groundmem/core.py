"""Shared domain types, identifier schemes, and validation.

Every other module builds on these value objects. All types are immutable
and safe to share between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class GroundMemError(Exception):
    """Base class for all engine errors."""


class MalformedFrameId(GroundMemError):
    """Frame-id text does not match the canonical grammar."""


class UnknownLabel(GroundMemError):
    """A closed enumeration received a token outside its vocabulary."""


class SpeakerId(Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, label: str) -> "SpeakerId":
        try:
            return cls(label)
        except ValueError:
            raise UnknownLabel(f"unknown speaker label: {label!r}")

    def other(self) -> "SpeakerId":
        return SpeakerId.B if self is SpeakerId.A else SpeakerId.A


@dataclass(frozen=True)
class Utterance:
    turn_index: int
    speaker: SpeakerId
    text: str

    def __post_init__(self):
        if self.turn_index < 0:
            raise ValueError("turn_index must be non-negative")
        if not self.text.strip():
            raise ValueError("utterance text must be non-empty")


_FRAME_ID_RE = re.compile(r"^(A|B)_([1-9][0-9]*)(?:_seq([1-9][0-9]*))?$")


@dataclass(frozen=True)
class FrameId:
    """Identifier of one artifact version: `B_3`, or `B_1_seq2` for later versions."""

    speaker: SpeakerId
    ordinal: int
    sequence: int = 1

    def __post_init__(self):
        if self.ordinal < 1 or self.sequence < 1:
            raise MalformedFrameId(
                f"ordinal and sequence must be positive: {self.ordinal}, {self.sequence}"
            )

    @property
    def sort_key(self) -> tuple[str, int, int]:
        """Canonical ordering: speaker label, then ordinal, then sequence."""
        return (self.speaker.value, self.ordinal, self.sequence)

    def render(self) -> str:
        base = f"{self.speaker.value}_{self.ordinal}"
        return base if self.sequence == 1 else f"{base}_seq{self.sequence}"

    def base(self) -> "FrameId":
        """The sequence-1 identity of this frame."""
        return FrameId(self.speaker, self.ordinal, 1)

    def with_sequence(self, sequence: int) -> "FrameId":
        return FrameId(self.speaker, self.ordinal, sequence)

    def __str__(self) -> str:
        return self.render()


def parse_frame_id(text: str) -> FrameId:
    """Parse the canonical frame-id text form; render∘parse is identity."""
    m = _FRAME_ID_RE.match(text)
    if not m:
        raise MalformedFrameId(f"not a valid frame id: {text!r}")
    speaker, ordinal, seq = m.groups()
    return FrameId(SpeakerId(speaker), int(ordinal), int(seq) if seq else 1)


class EditAction(Enum):
    NEW = "NEW"
    CONTINUE = "CONTINUE"
    SKIP = "SKIP"

    @classmethod
    def parse(cls, token: str) -> "EditAction":
        cleaned = token.strip().strip("[]").upper()
        try:
            return cls(cleaned)
        except ValueError:
            raise UnknownLabel(f"unknown edit action: {token!r}")


@dataclass(frozen=True)
class ObserverDecision:
    action: EditAction
    scene_descriptor: str = ""
    metadata: str = ""
    frame_meta: str = ""
    relation_hint: Optional[str] = None

    def __post_init__(self):
        if self.action is EditAction.SKIP and self.scene_descriptor:
            raise ValueError("SKIP decisions carry no scene descriptor")
        if self.action is not EditAction.SKIP and not self.scene_descriptor:
            raise ValueError(f"{self.action.value} requires a scene descriptor")


class Outline(Enum):
    BLACK = "black"
    RED = "red"
    BLUE = "blue"


@dataclass(frozen=True)
class CanvasObject:
    name: str
    outline: Outline
    box: tuple[int, int, int, int]  # (ymin, xmin, ymax, xmax)
    attributes: tuple[str, ...] = ()

    def __post_init__(self):
        ymin, xmin, ymax, xmax = self.box
        if not (ymin < ymax and xmin < xmax):
            raise ValueError(f"degenerate box for {self.name!r}: {self.box}")


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    pixels: tuple[tuple[int, int, int], ...]  # row-major RGB
    object_registry: tuple[CanvasObject, ...] = ()

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height:
            raise ValueError("pixel count does not match dimensions")
        for obj in self.object_registry:
            ymin, xmin, ymax, xmax = obj.box
            if ymin < 0 or xmin < 0 or ymax > self.height or xmax > self.width:
                raise ValueError(f"object {obj.name!r} box outside canvas bounds")


@dataclass(frozen=True)
class ArtifactVersion:
    frame_id: FrameId
    canvas: Optional[Canvas]
    summary: Optional[str]
    prompt: str
    metadata: str
    created_at_turn: int

    def __post_init__(self):
        if self.canvas is None and self.summary is None:
            raise ValueError("artifact version needs a canvas or a summary")


@dataclass(frozen=True)
class Triplet:
    subject: FrameId
    predicate: str
    object: FrameId

    def __post_init__(self):
        if self.subject == self.object:
            raise ValueError("triplet subject and object must differ")


@dataclass(frozen=True)
class AtomicFact:
    text: str
    source_frame: FrameId


@dataclass(frozen=True)
class FactVerdict:
    fact: AtomicFact
    verdict: bool
    box: Optional[tuple[int, int, int, int]] = None


@dataclass(frozen=True)
class FaithfulnessReport:
    candidate_index: int
    verdicts: tuple[FactVerdict, ...]
    phi: float

    @classmethod
    def from_verdicts(cls, candidate_index: int, verdicts) -> "FaithfulnessReport":
        verdicts = tuple(verdicts)
        phi = 1.0 if not verdicts else sum(v.verdict for v in verdicts) / len(verdicts)
        return cls(candidate_index, verdicts, phi)


class PlanCommand(Enum):
    POV = "POV"
    RAG = "RAG"
    PROCESS = "PROCESS"
    FINAL_ANSWER = "FINAL_ANSWER"


@dataclass(frozen=True)
class PlanStep:
    command: PlanCommand
    instruction: str
    retrieval_count: Optional[int] = None

    def __post_init__(self):
        if self.command is PlanCommand.RAG:
            if self.retrieval_count is None or self.retrieval_count < 1:
                raise ValueError("RAG steps need retrieval_count >= 1")
        elif self.retrieval_count is not None:
            raise ValueError("retrieval_count only applies to RAG steps")


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]


@dataclass(frozen=True)
class PlanViolation:
    step_index: int  # -1 for whole-plan rules
    rule: str

    def __str__(self) -> str:
        return f"step {self.step_index}: {self.rule}" if self.step_index >= 0 else self.rule


def validate_plan(plan: Plan) -> list[PlanViolation]:
    """Check the two Plan invariants; an empty list means the plan conforms.

    Sound and complete: every violating plan yields at least one violation,
    every conforming plan yields none.
    """
    violations: list[PlanViolation] = []
    final_positions = [
        i for i, s in enumerate(plan.steps) if s.command is PlanCommand.FINAL_ANSWER
    ]
    if not final_positions:
        violations.append(PlanViolation(-1, "missing-FINAL_ANSWER"))
    else:
        for i in final_positions[:-1]:
            violations.append(PlanViolation(i, "duplicate-FINAL_ANSWER"))
        if final_positions[-1] != len(plan.steps) - 1:
            violations.append(PlanViolation(final_positions[-1], "FINAL_ANSWER-not-last"))
    for i, step in enumerate(plan.steps):
        if step.command is PlanCommand.RAG and (
            step.retrieval_count is None or step.retrieval_count < 1
        ):
            violations.append(PlanViolation(i, "RAG-retrieval-count-invalid"))
    return violations


class RelationType(Enum):
    TEMPORAL = "Temporal"
    SPATIAL = "Spatial"
    ATTRIBUTIVE = "Attributive"
    INFERRED = "Inferred"

    @classmethod
    def parse(cls, label: str) -> "RelationType":
        try:
            return cls(label)
        except ValueError:
            raise UnknownLabel(f"unknown relation type: {label!r}")


@dataclass(frozen=True)
class QAItem:
    question: str
    gold_answer: str
    relation_type: RelationType
    questioner: SpeakerId
    dialogue_id: str


class JudgeOutcome(Enum):
    SAME = "SAME"
    DIFFERENT = "DIFFERENT"


@dataclass(frozen=True)
class JudgeVerdict:
    verdict: JudgeOutcome
    reasoning: str = ""


@dataclass(frozen=True)
class Annotation:
    complexity: str  # local | relational
    question_kind: str  # binary | open
    constraint: str  # list | free
    validity: str  # valid | missing

    _COMPLEXITY = ("local", "relational")
    _KIND = ("binary", "open")
    _CONSTRAINT = ("list", "free")
    _VALIDITY = ("valid", "missing")

    def __post_init__(self):
        for value, allowed, name in (
            (self.complexity, self._COMPLEXITY, "complexity"),
            (self.question_kind, self._KIND, "question_kind"),
            (self.constraint, self._CONSTRAINT, "constraint"),
            (self.validity, self._VALIDITY, "validity"),
        ):
            if value not in allowed:
                raise UnknownLabel(f"unknown {name} label: {value!r}")


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if v != v or v in (float("inf"), float("-inf")):
                raise ValueError("embedding values must be finite")

    @property
    def dimension(self) -> int:
        return len(self.values)
