"""Phase-2 inference: plan generation, instruction refinement, and plan
execution (POV filtering, gated retrieval, processing, final synthesis)."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    GroundMemError,
    Plan,
    PlanCommand,
    PlanStep,
    SpeakerId,
    validate_plan,
)
from .gateway import ChatRequest, ModelGateway, RoleTag
from .linker import TripletGraph
from .memory import EmptyBank, EvidencePack, MemoryBank
from .parsers import extract_answer_span, parse_planner_output

log = logging.getLogger(__name__)

DEFAULT_ABSTAIN = "not specified"
DEFAULT_PLAN_CAP = 12


class PlanInvalid(GroundMemError):
    """Planner failed to produce a valid plan after one retry."""


class StepFailed(GroundMemError):
    """A plan step raised; carries the step index."""

    def __init__(self, step_index: int, cause: Exception):
        super().__init__(f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.cause = cause


@dataclass(frozen=True)
class ReasonerConfig:
    lam: float = 0.7
    condition: str = "visual"  # visual | textual | both
    abstain: str = DEFAULT_ABSTAIN
    plan_cap: int = DEFAULT_PLAN_CAP
    restate_patch: bool = True


@dataclass
class StepRecord:
    index: int
    command: str
    instruction: str
    output: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "command": self.command,
            "instruction": self.instruction,
            "output": self.output,
        }


@dataclass
class ExecutionTrace:
    question: str
    answer: str = ""
    steps: list[StepRecord] = field(default_factory=list)
    retrieve_calls: int = 0
    evidence_frames: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "steps": [s.to_dict() for s in self.steps],
            "retrieve_calls": self.retrieve_calls,
            "evidence_frames": self.evidence_frames,
            "notes": self.notes,
        }


def make_plan(question: str, asker: SpeakerId, gateway: ModelGateway, plan_cap: int = DEFAULT_PLAN_CAP) -> Plan:
    """Planner call with one validation-feedback retry."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    base_prompt = (
        "Produce a step-by-step plan to answer the question.\n"
        f"<question>{question}</question>\n"
        f"<asker>{asker.value}</asker>"
    )
    feedback = ""
    for attempt in range(2):
        request = ChatRequest(RoleTag.PLANNER, (("user", base_prompt + feedback),))
        raw = gateway.chat(request)
        try:
            plan = parse_planner_output(raw)
        except GroundMemError as exc:
            feedback = f"\n<feedback>previous plan unparsable: {exc}</feedback>"
            continue
        problems = [str(v) for v in validate_plan(plan)]
        if len(plan.steps) > plan_cap:
            problems.append(f"plan exceeds {plan_cap} steps")
        if not problems:
            return plan
        feedback = "\n<feedback>" + "; ".join(problems) + "</feedback>"
    raise PlanInvalid(f"planner failed twice for question: {question!r}")


def refine_instruction(step: PlanStep, question: str, gateway: ModelGateway) -> PlanStep:
    """Best-effort rewrite of a step's instruction; command and count are fixed."""
    prompt = (
        "Rewrite the instruction as a direct, search-friendly task.\n"
        f"<question>{question}</question>\n"
        f"<instruction>{step.instruction}</instruction>"
    )
    try:
        refined = gateway.chat(ChatRequest(RoleTag.REFINER, (("user", prompt),))).strip()
    except GroundMemError as exc:
        log.warning("refiner failed (%s); keeping original instruction", exc)
        return step
    if not refined:
        return step
    return PlanStep(step.command, refined, retrieval_count=step.retrieval_count)


def render_evidence(pack: EvidencePack, bank: MemoryBank) -> str:
    """Plain-text evidence block: one header, one line per object, then the
    summary, metadata, and triplet lines for each retrieved frame."""

    def meta_label(frame) -> str:
        try:
            meta = bank.latest(frame).metadata
        except GroundMemError:
            return ""
        return meta.splitlines()[0] if meta else ""

    lines: list[str] = []
    for item in pack.items:
        version = item.version
        label = item.metadata.splitlines()[0] if item.metadata else ""
        lines.append(f"[frame {version.frame_id.base().render()} | {label}]")
        if version.canvas is not None:
            for obj in version.canvas.object_registry:
                attrs = ", ".join(obj.attributes)
                lines.append(f"object: {obj.name} [{attrs}]")
        if version.summary:
            lines.append("summary: " + " ".join(version.summary.splitlines()))
        if item.metadata:
            lines.append("metadata: " + "; ".join(item.metadata.splitlines()))
        for t in item.triplets:
            lines.append(
                f"triplet: {t.subject.render()} ({meta_label(t.subject)}) "
                f"{t.predicate} {t.object.render()} ({meta_label(t.object)})"
            )
    return "\n".join(lines)


_BARE_AFFIRMATION_RE = re.compile(r"^(yes|no|yeah|yep|nope)[.!]?$", re.IGNORECASE)
_INDIRECT_REQUEST_RE = re.compile(r"\b(remember|recall|remind)\b", re.IGNORECASE)


def _ask_answerer(
    question: str, evidence: str, scratch: str, gateway: ModelGateway, restate: bool = False
) -> str:
    prompt = (
        "Answer the question from the evidence only.\n"
        f"<question>{question}</question>\n"
        f"<evidence>{evidence}</evidence>\n"
        f"<scratch>{scratch}</scratch>"
    )
    if restate:
        prompt += "\n<restate>state the remembered content, not a bare yes</restate>"
    raw = gateway.chat(ChatRequest(RoleTag.ANSWERER, (("user", prompt),)))
    answer = extract_answer_span(raw)
    return answer if answer else raw.strip()


def execute_plan(
    plan: Plan,
    bank: MemoryBank,
    graph: TripletGraph,
    question: str,
    gateway: ModelGateway,
    config: ReasonerConfig = ReasonerConfig(),
) -> ExecutionTrace:
    """Run a validated plan; retrieval happens only on RAG steps."""
    violations = validate_plan(plan)
    if violations:
        raise PlanInvalid("; ".join(str(v) for v in violations))
    trace = ExecutionTrace(question=question)
    pov = "BOTH"
    evidence_text_parts: list[str] = []
    scratch_parts: list[str] = []
    empty_bank = False
    for index, step in enumerate(plan.steps):
        try:
            if step.command is PlanCommand.POV:
                token = step.instruction.strip().upper()
                if token not in ("A", "B", "BOTH"):
                    raise ValueError(f"POV instruction must resolve to A/B/BOTH: {step.instruction!r}")
                pov = token
                output = pov
            elif step.command is PlanCommand.RAG:
                trace.retrieve_calls += 1
                try:
                    hits = bank.retrieve(
                        step.instruction or question,
                        step.retrieval_count,
                        pov,
                        config.condition,
                        config.lam,
                        gateway,
                    )
                except EmptyBank as exc:
                    empty_bank = True
                    trace.notes.append(f"EmptyBank at step {index}: {exc}")
                    output = "no frames retrievable"
                else:
                    pack = bank.assemble_evidence(hits, graph)
                    evidence_text_parts.append(render_evidence(pack, bank))
                    trace.evidence_frames.extend(
                        h.frame_id.base().render() for h in hits
                    )
                    output = ", ".join(h.frame_id.base().render() for h in hits)
            elif step.command is PlanCommand.PROCESS:
                prompt = (
                    "Process the evidence per the instruction.\n"
                    f"<instruction>{step.instruction}</instruction>\n"
                    f"<evidence>{chr(10).join(evidence_text_parts)}</evidence>\n"
                    f"<scratch>{chr(10).join(scratch_parts)}</scratch>"
                )
                output = gateway.chat(ChatRequest(RoleTag.PROCESSOR, (("user", prompt),)))
                scratch_parts.append(output)
            else:  # FINAL_ANSWER
                evidence = "\n".join(evidence_text_parts)
                scratch = "\n".join(scratch_parts)
                if empty_bank and not evidence.strip():
                    trace.answer = config.abstain
                    output = trace.answer
                else:
                    answer = _ask_answerer(question, evidence, scratch, gateway)
                    if (
                        config.restate_patch
                        and _INDIRECT_REQUEST_RE.search(question)
                        and _BARE_AFFIRMATION_RE.match(answer.strip())
                    ):
                        answer = _ask_answerer(
                            question, evidence, scratch, gateway, restate=True
                        )
                    trace.answer = answer if answer.strip() else config.abstain
                    output = trace.answer
        except GroundMemError as exc:
            raise StepFailed(index, exc)
        except ValueError as exc:
            raise StepFailed(index, exc)
        trace.steps.append(
            StepRecord(index, step.command.value, step.instruction, output)
        )
    return trace


def answer_question(
    question: str,
    asker: SpeakerId,
    bank: MemoryBank,
    graph: TripletGraph,
    gateway: ModelGateway,
    config: ReasonerConfig = ReasonerConfig(),
) -> tuple[str, ExecutionTrace]:
    """Plan, refine, and execute for one question from `asker`."""
    plan = make_plan(question, asker, gateway, plan_cap=config.plan_cap)
    refined = Plan(
        tuple(refine_instruction(step, question, gateway) for step in plan.steps)
    )
    violations = validate_plan(refined)
    if violations:
        log.warning("refinement broke the plan (%s); using the original", violations)
        refined = plan
    trace = execute_plan(refined, bank, graph, question, gateway, config)
    return trace.answer, trace
