"""Evaluation harness: transcript/QA ingestion, judge protocol, question
annotation, accuracy aggregation, and the faithfulness logistic analysis."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import reasoner
from .core import (
    Annotation,
    GroundMemError,
    JudgeOutcome,
    JudgeVerdict,
    QAItem,
    RelationType,
    SpeakerId,
    UnknownLabel,
    Utterance,
)
from .gateway import ChatRequest, ModelGateway, RoleTag
from .parsers import parse_annotator_output, parse_judge_output
from .pipeline import Dialogue, PhaseOneBuilder, SeedFrame

log = logging.getLogger(__name__)

RELATION_ORDER = (
    RelationType.TEMPORAL,
    RelationType.SPATIAL,
    RelationType.ATTRIBUTIVE,
    RelationType.INFERRED,
)

_CONDITION_MAP = {
    "image": "visual",
    "visual": "visual",
    "text": "textual",
    "textual": "textual",
    "both": "both",
    "full-dialog": "full-dialog",
}


class FormatError(GroundMemError):
    """Malformed input record; carries the offending line number."""


class UnknownRelationType(GroundMemError):
    pass


class DegenerateData(GroundMemError):
    """Logit fit attempted on a single outcome class."""


def normalize_condition(name: str) -> str:
    try:
        return _CONDITION_MAP[name]
    except KeyError:
        raise ValueError(f"unknown condition: {name!r}")


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------


def load_transcripts(path: str) -> list[Dialogue]:
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                seeds = tuple(
                    SeedFrame(
                        speaker=SpeakerId.parse(s["speaker"]),
                        ordinal=int(s["ordinal"]),
                        scene=str(s["scene"]),
                        descriptor=str(s["descriptor"]),
                        turns=tuple(
                            (int(t["turn"]), str(t["text"])) for t in s.get("turns", [])
                        ),
                    )
                    for s in record.get("initial_frames", [])
                )
                utterances = tuple(
                    Utterance(
                        turn_index=int(t["turn"]),
                        speaker=SpeakerId.parse(t["speaker"]),
                        text=str(t["text"]),
                    )
                    for t in record["turns"]
                )
                dialogue = Dialogue(
                    dialogue_id=str(record["dialogue_id"]),
                    utterances=utterances,
                    seeds=seeds,
                )
            except (KeyError, TypeError, ValueError, UnknownLabel) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}")
            turns = [u.turn_index for u in dialogue.utterances]
            if turns != sorted(turns) or len(set(turns)) != len(turns):
                raise FormatError(
                    f"{path}:{line_no}: turn indices must be strictly increasing"
                )
            dialogues.append(dialogue)
    return dialogues


def load_qa(path: str) -> list[QAItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                relation = RelationType.parse(str(record["relation_type"]))
            except UnknownLabel as exc:
                raise UnknownRelationType(f"{path}:{line_no}: {exc}")
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}")
            try:
                items.append(
                    QAItem(
                        question=str(record["question"]),
                        gold_answer=str(record["gold_answer"]),
                        relation_type=relation,
                        questioner=SpeakerId.parse(str(record["questioner"])),
                        dialogue_id=str(record["dialogue_id"]),
                    )
                )
            except (KeyError, UnknownLabel) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}")
    return items


# ---------------------------------------------------------------------------
# Judge and annotator
# ---------------------------------------------------------------------------


def judge(predicted: str, gold: str, question: str, gateway: ModelGateway) -> JudgeVerdict:
    prompt = (
        "Judge only the final answer.\n"
        f"<question>{question}</question>\n"
        f"<llm_response>{predicted}</llm_response>\n"
        f"<correct_response>{gold}</correct_response>"
    )
    raw = gateway.chat(ChatRequest(RoleTag.JUDGE, (("user", prompt),)))
    return parse_judge_output(raw)


def annotate(item: QAItem, gateway: ModelGateway) -> Annotation:
    prompt = (
        "Classify the question.\n"
        f"<relation_type>{item.relation_type.value}</relation_type>\n"
        f"<question>{item.question}</question>\n"
        f"<gold_answer>{item.gold_answer}</gold_answer>"
    )
    raw = gateway.chat(ChatRequest(RoleTag.ANNOTATOR, (("user", prompt),)))
    return parse_annotator_output(raw)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def render(self) -> str:
        return f"{self.accuracy:.2f}"


@dataclass
class Report:
    overall: Optional[Cell] = None
    by_relation: dict[str, Cell] = field(default_factory=dict)
    by_scope: dict[str, Cell] = field(default_factory=dict)
    by_relation_scope: dict[tuple[str, str], Cell] = field(default_factory=dict)
    condition: str = ""

    def render_text(self) -> str:
        headers = [r.value for r in RELATION_ORDER] + ["Overall"]
        lines = ["Accuracy by relation type", ""]
        lines.append(" | ".join(["Condition".ljust(12)] + [h.ljust(11) for h in headers]))
        row = [self.condition.ljust(12)]
        for r in RELATION_ORDER:
            cell = self.by_relation.get(r.value)
            row.append((cell.render() if cell else "—").ljust(11))
        row.append((self.overall.render() if self.overall else "—").ljust(11))
        lines.append(" | ".join(row))
        lines += ["", "Accuracy by reasoning scope", ""]
        for scope in ("local", "relational"):
            cell = self.by_scope.get(scope)
            lines.append(f"{scope.ljust(12)} | {cell.render() if cell else '—'}")
        lines += ["", "Relation x scope", ""]
        for r in RELATION_ORDER:
            for scope in ("local", "relational"):
                cell = self.by_relation_scope.get((r.value, scope))
                lines.append(
                    f"{r.value.ljust(12)} | {scope.ljust(10)} | "
                    f"{cell.render() if cell else '—'}"
                )
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        rows = ["group,key,correct,total,accuracy"]
        if self.overall:
            rows.append(
                f"overall,all,{self.overall.correct},{self.overall.total},"
                f"{self.overall.accuracy:.6f}"
            )
        for key in sorted(self.by_relation):
            cell = self.by_relation[key]
            rows.append(f"relation,{key},{cell.correct},{cell.total},{cell.accuracy:.6f}")
        for key in sorted(self.by_scope):
            cell = self.by_scope[key]
            rows.append(f"scope,{key},{cell.correct},{cell.total},{cell.accuracy:.6f}")
        for rel, scope in sorted(self.by_relation_scope):
            cell = self.by_relation_scope[(rel, scope)]
            rows.append(
                f"relation_x_scope,{rel}/{scope},{cell.correct},{cell.total},"
                f"{cell.accuracy:.6f}"
            )
        return "\n".join(rows) + "\n"


def aggregate(results: Sequence[dict], condition: str = "") -> Report:
    """results: dicts with keys item, verdict, annotation (optional), mean_phi."""

    def tally(selector) -> dict:
        buckets: dict = {}
        for r in results:
            key = selector(r)
            if key is None:
                continue
            correct, total = buckets.get(key, (0, 0))
            buckets[key] = (
                correct + (1 if r["verdict"].verdict is JudgeOutcome.SAME else 0),
                total + 1,
            )
        return {k: Cell(c, t) for k, (c, t) in buckets.items()}

    report = Report(condition=condition)
    overall = tally(lambda r: "all")
    report.overall = overall.get("all")
    report.by_relation = tally(lambda r: r["item"].relation_type.value)
    report.by_scope = tally(
        lambda r: r["annotation"].complexity if r.get("annotation") else None
    )
    report.by_relation_scope = tally(
        lambda r: (r["item"].relation_type.value, r["annotation"].complexity)
        if r.get("annotation")
        else None
    )
    return report


# ---------------------------------------------------------------------------
# Faithfulness logistic analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogitFit:
    intercept: float
    slope: float
    converged: bool
    iterations: int
    message: str = ""


def log_likelihood(weights: np.ndarray, phi: np.ndarray, y: np.ndarray) -> float:
    z = weights[0] + weights[1] * phi
    # log sigmoid computed stably
    return float(np.sum(y * z - np.logaddexp(0.0, z)))


def fit_faithfulness_logit(
    pairs: Sequence[tuple[float, bool]],
    max_iterations: int = 100,
    tolerance: float = 1e-8,
) -> LogitFit:
    """Damped Newton fit of P(correct) = sigmoid(intercept + slope * phi)."""
    if len(pairs) < 2:
        return LogitFit(0.0, 0.0, False, 0, "needs at least two samples")
    phi = np.asarray([p for p, _ in pairs], dtype=np.float64)
    y = np.asarray([1.0 if c else 0.0 for _, c in pairs], dtype=np.float64)
    if y.min() == y.max():
        return LogitFit(0.0, 0.0, False, 0, "degenerate data: single outcome class")
    X = np.column_stack([np.ones_like(phi), phi])
    w = np.zeros(2)
    ll = log_likelihood(w, phi, y)
    for iteration in range(1, max_iterations + 1):
        p = 1.0 / (1.0 + np.exp(-(X @ w)))
        gradient = X.T @ (y - p)
        if float(np.linalg.norm(gradient)) < tolerance:
            return LogitFit(float(w[0]), float(w[1]), True, iteration)
        weight = p * (1.0 - p)
        hessian = X.T @ (X * weight[:, None])
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            return LogitFit(float(w[0]), float(w[1]), False, iteration, "singular Hessian")
        scale = 1.0
        while scale > 1e-8:
            candidate = w + scale * step
            if log_likelihood(candidate, phi, y) >= ll:
                break
            scale /= 2.0
        else:
            # Line search stalled: w is a stationary point at float precision.
            # Accept it when the gradient is small relative to the problem scale.
            converged = float(np.linalg.norm(gradient)) < tolerance * max(1.0, abs(ll))
            return LogitFit(float(w[0]), float(w[1]), converged, iteration)
        w = w + scale * step
        ll = log_likelihood(w, phi, y)
    gradient = X.T @ (y - 1.0 / (1.0 + np.exp(-(X @ w))))
    converged = float(np.linalg.norm(gradient)) < tolerance * max(1.0, abs(ll))
    return LogitFit(float(w[0]), float(w[1]), converged, max_iterations)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


def full_dialog_answer(
    dialogue: Dialogue, question: str, gateway: ModelGateway, abstain: str
) -> tuple[str, reasoner.ExecutionTrace]:
    """Baseline that sends the raw transcript straight to the answerer."""
    lines: list[str] = []
    for seed in dialogue.seeds:
        lines.extend(f"{seed.speaker.value}: {text}" for _, text in seed.turns)
    lines.extend(f"{u.speaker.value}: {u.text}" for u in dialogue.utterances)
    evidence = "\n".join(lines)
    answer = reasoner._ask_answerer(question, evidence, "", gateway)
    trace = reasoner.ExecutionTrace(question=question, answer=answer or abstain)
    trace.notes.append("full-dialog baseline: no retrieval")
    return trace.answer, trace


def run_benchmark(
    dialogues: Sequence[Dialogue],
    qa: Sequence[QAItem],
    condition: str,
    gateway: ModelGateway,
    config: Optional[reasoner.ReasonerConfig] = None,
    j_candidates: int = 3,
    out_dir: Optional[str] = None,
) -> tuple[Report, list[dict], LogitFit]:
    """Phase 1 per dialogue, then Phase 2 + judge + annotate per QA item."""
    condition = normalize_condition(condition)
    full_dialog = condition == "full-dialog"
    build_condition = "visual" if full_dialog else condition
    config = config or reasoner.ReasonerConfig(condition=build_condition)
    if config.condition != build_condition:
        config = reasoner.ReasonerConfig(
            lam=config.lam,
            condition=build_condition,
            abstain=config.abstain,
            plan_cap=config.plan_cap,
            restate_patch=config.restate_patch,
        )
    by_id = {d.dialogue_id: d for d in dialogues}
    builds = {}
    if not full_dialog:
        builder = PhaseOneBuilder(gateway, build_condition, j_candidates=j_candidates)
        for dialogue in dialogues:
            builds[dialogue.dialogue_id] = builder.build(dialogue)
    results: list[dict] = []
    per_dialogue_index: dict[str, int] = {}
    for item in qa:
        dialogue = by_id.get(item.dialogue_id)
        if dialogue is None:
            log.warning("QA item references unknown dialogue %r; skipped", item.dialogue_id)
            continue
        index = per_dialogue_index.get(item.dialogue_id, 0)
        per_dialogue_index[item.dialogue_id] = index + 1
        mean_phi = None
        try:
            if full_dialog:
                answer, trace = full_dialog_answer(
                    dialogue, item.question, gateway, config.abstain
                )
            else:
                build = builds[item.dialogue_id]
                mean_phi = build.mean_phi
                answer, trace = reasoner.answer_question(
                    item.question,
                    item.questioner,
                    build.bank,
                    build.graph,
                    gateway,
                    config,
                )
            verdict = judge(answer, item.gold_answer, item.question, gateway)
            annotation = annotate(item, gateway)
        except GroundMemError as exc:
            log.warning("item failed (%s / %r): %s", item.dialogue_id, item.question, exc)
            results.append(
                {
                    "item": item,
                    "verdict": JudgeVerdict(JudgeOutcome.DIFFERENT, f"error: {exc}"),
                    "annotation": None,
                    "mean_phi": mean_phi,
                    "answer": "",
                    "trace": None,
                    "error": str(exc),
                    "index": index,
                }
            )
            continue
        results.append(
            {
                "item": item,
                "verdict": verdict,
                "annotation": annotation,
                "mean_phi": mean_phi,
                "answer": answer,
                "trace": trace,
                "index": index,
            }
        )
    report = aggregate(results, condition=condition)
    logit_pairs = [
        (r["mean_phi"], r["verdict"].verdict is JudgeOutcome.SAME)
        for r in results
        if r["mean_phi"] is not None
    ]
    fit = fit_faithfulness_logit(logit_pairs)
    if out_dir:
        _write_artifacts(out_dir, report, results, fit)
    return report, results, fit


def _write_artifacts(out_dir: str, report: Report, results: Sequence[dict], fit: LogitFit) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(report.render_text())
    with open(os.path.join(out_dir, "report.csv"), "w") as fh:
        fh.write(report.render_csv())
    with open(os.path.join(out_dir, "logit.json"), "w") as fh:
        json.dump(
            {
                "intercept": fit.intercept,
                "slope": fit.slope,
                "converged": fit.converged,
                "iterations": fit.iterations,
                "message": fit.message,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    for r in results:
        item: QAItem = r["item"]
        trace_dir = os.path.join(out_dir, "traces", item.dialogue_id)
        os.makedirs(trace_dir, exist_ok=True)
        payload = {
            "question": item.question,
            "gold_answer": item.gold_answer,
            "relation_type": item.relation_type.value,
            "answer": r["answer"],
            "verdict": r["verdict"].verdict.value,
            "mean_phi": r["mean_phi"],
            "annotation": (
                {
                    "complexity": r["annotation"].complexity,
                    "question_kind": r["annotation"].question_kind,
                    "constraint": r["annotation"].constraint,
                    "validity": r["annotation"].validity,
                }
                if r["annotation"]
                else None
            ),
            "trace": r["trace"].to_dict() if r["trace"] else None,
        }
        with open(os.path.join(trace_dir, f"{r['index']}.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
