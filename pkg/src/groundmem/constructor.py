"""Materializes edit decisions into artifact versions.

For each NEW/CONTINUE decision: build a style-encoded prompt (visual channel)
and/or a propositional summary (textual channel), generate J candidates,
score each candidate's faithfulness against decomposed atomic facts, select
the argmax, and normalize the stored canvas to the canonical palette.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import lexicon
from .canvas_io import canvas_from_array, canvas_to_array
from .core import (
    ArtifactVersion,
    AtomicFact,
    Canvas,
    EditAction,
    FaithfulnessReport,
    FrameId,
    GroundMemError,
    ObserverDecision,
    Outline,
)
from .gateway import ChatRequest, ModelGateway, RoleTag
from .parsers import parse_fact_checker_output, parse_fact_list, parse_scene_output

log = logging.getLogger(__name__)

DEFAULT_CANDIDATES = 3
ASSUMPTION_BUDGET = 3
DEFAULT_TOLERANCE = 16

# Canonical colors pixels are snapped to after generation.
DEFAULT_PALETTE = (
    (255, 255, 255),
    (0, 0, 0),
    (255, 0, 0),
    (0x1F, 0x4E, 0x79),
)

CREATION_PREAMBLE = "A clean, minimalist, iconic scene."
CREATION_SUFFIX = "Solid white background, no shadows."

# Structural backgrounds assumed alongside an explicit counterpart.
_STRUCTURE_PAIRS = {"wall": "floor"}

# Accessory entities that dress a host object instead of standing alone.
_DRESSING_HOSTS = {"bedspread": "bed", "pillow": "bed", "tablecloth": "table"}


class AssumptionBudgetExceeded(GroundMemError):
    """A prompt would carry more than the allowed number of assumed entities."""


class CandidateGenerationFailed(GroundMemError):
    """No candidate artifact could be generated."""


def _article(noun: str) -> str:
    return "an" if noun[:1] in "aeiou" else "a"


def _entity_phrase(name: str, outline: Outline, attributes=(), position=None) -> str:
    attrs = " ".join(attributes)
    head = f"{attrs + ' ' if attrs else ''}{name}"
    phrase = f"{_article(head)} {head} (in {outline.value} outline)"
    if position:
        phrase += f" {position}"
    return phrase


def _join_phrases(phrases: Sequence[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    if len(phrases) == 2:
        return f"{phrases[0]} and {phrases[1]}"
    return ", ".join(phrases[:-1]) + ", and " + phrases[-1]


def build_creation_prompt(descriptor: str, frame_meta: str) -> str:
    """First prompt of a frame: explicit entities plus assumed scene defaults."""
    if not descriptor.strip():
        raise ValueError("scene descriptor must be non-empty")
    scene = lexicon.find_scene(descriptor) or lexicon.find_scene(frame_meta) or frame_meta
    scene = scene.strip()
    entities = lexicon.extract_entities(descriptor)
    phrases = []
    assumed: list[str] = []
    for entity in entities:
        outline = Outline.BLACK if entity.position else Outline.RED
        phrases.append(
            _entity_phrase(entity.name, outline, entity.attributes, entity.position)
        )
        paired = _STRUCTURE_PAIRS.get(entity.name)
        if paired and not any(e.name == paired for e in entities):
            assumed.append(paired)
    for default in lexicon.ROOM_DEFAULTS.get(scene, []):
        if not any(e.name == default for e in entities) and default not in assumed:
            assumed.append(default)
    if len(assumed) > ASSUMPTION_BUDGET:
        raise AssumptionBudgetExceeded(
            f"{len(assumed)} assumed entities exceed the budget of {ASSUMPTION_BUDGET}"
        )
    phrases.extend(_entity_phrase(name, Outline.BLUE) for name in assumed)
    body = f"In {_article(scene)} {scene}" if scene else "An unspecified scene"
    if phrases:
        body += f", {_join_phrases(phrases)}"
    return f"{CREATION_PREAMBLE} {body}. {CREATION_SUFFIX}"


def build_edit_prompt(
    descriptor: str,
    previous_prompt_history: Sequence[str],
    previous_registry: Sequence = (),
) -> str:
    """Incremental edit prompt: Add/Remove/Replace operations plus an explicit
    Keep clause naming every surviving object."""
    if not descriptor.strip():
        raise ValueError("scene descriptor must be non-empty")
    if not previous_prompt_history:
        raise ValueError("edit prompts require prior prompt history")
    existing = {
        obj.name: obj for obj in previous_registry if "scene" not in obj.attributes
    }
    sentences: list[str] = []
    touched: set[str] = set()

    move = re.search(
        r"\bmove the ([a-z ]+?) to (?:the |a |an )?([a-z]+(?: [a-z]+)?)",
        descriptor.lower(),
    )
    if move:
        name = lexicon.canonical_noun(move.group(1).strip())
        destination = move.group(2).strip()
        sentences.append(
            f"DELETE the {name}. $$$ ADD "
            + _entity_phrase(name, Outline.BLACK, position=f"at the {destination}")
            + "."
        )
        touched.add(name)
    removal = re.match(r"\s*remove the ([a-z ]+)", descriptor.lower())
    if removal:
        name = lexicon.canonical_noun(removal.group(1).strip().rstrip("."))
        sentences.append(f"Remove the {name}.")
        touched.add(name)
    if not move and not removal:
        for entity in lexicon.extract_entities(descriptor):
            host = _DRESSING_HOSTS.get(entity.name)
            if host and host in existing and entity.name not in existing:
                old = existing[host]
                dressing = " ".join(list(entity.attributes) + [entity.name])
                sentences.append(
                    f"Replace the {host} (in {old.outline.value} outline) with "
                    f"{_article(host)} {host} (in black outline) that has "
                    f"{_article(dressing)} {dressing}."
                )
                touched.add(host)
                continue
            touched.add(entity.name)
            if entity.name in existing:
                old = existing[entity.name]
                sentences.append(
                    f"Replace the {entity.name} (in {old.outline.value} outline) with "
                    + _entity_phrase(
                        entity.name, Outline.BLACK, entity.attributes, entity.position
                    )
                    + "."
                )
            else:
                outline = Outline.BLACK if entity.position else Outline.RED
                sentences.append(
                    "Add "
                    + _entity_phrase(entity.name, outline, entity.attributes, entity.position)
                    + "."
                )
    survivors = [name for name in existing if name not in touched]
    if survivors:
        sentences.append(f"Keep the {_join_phrases(survivors)} unchanged.")
    if not sentences:
        sentences.append("Keep the scene unchanged.")
    return " ".join(sentences)


def decompose_facts(
    descriptor: str,
    prompt_history: Sequence[str],
    gateway: ModelGateway,
    source_frame: FrameId,
) -> list[AtomicFact]:
    """Single-proposition facts covering confirmed content of the accumulated
    prompt history plus the current descriptor (assumed content excluded)."""
    if not descriptor.strip():
        raise ValueError("scene descriptor must be non-empty")
    lines = list(prompt_history) + [descriptor]
    request = ChatRequest(
        RoleTag.FACT_DECOMPOSER,
        (("user", "Decompose into atomic facts.\n<prompts>" + "\n".join(lines) + "</prompts>"),),
    )
    facts = parse_fact_list(gateway.chat(request))
    return [AtomicFact(text=f, source_frame=source_frame) for f in facts]


def generate_candidates(
    descriptor: str,
    previous_version: Optional[ArtifactVersion],
    j_candidates: int,
    gateway: ModelGateway,
    prompt: str,
) -> list[Canvas]:
    """Exactly J candidates when the backend cooperates; fewer (>=1) with a
    diagnostic when some generations fail."""
    if j_candidates < 1:
        raise ValueError("candidate count must be >= 1")
    base = previous_version.canvas if previous_version else None
    candidates: list[Canvas] = []
    last_error: Optional[Exception] = None
    for j in range(j_candidates):
        try:
            candidates.append(gateway.edit_image(base, prompt, sample_seed=j))
        except GroundMemError as exc:
            last_error = exc
            log.warning("candidate %d generation failed: %s", j, exc)
    if not candidates:
        raise CandidateGenerationFailed(f"all {j_candidates} generations failed: {last_error}")
    if len(candidates) < j_candidates:
        log.warning("proceeding with %d/%d candidates", len(candidates), j_candidates)
    return candidates


def faithfulness(
    candidate: Canvas,
    facts: Sequence[AtomicFact],
    gateway: ModelGateway,
    candidate_index: int = 0,
) -> FaithfulnessReport:
    """One verdict per fact from the fact checker; phi = (#true)/(#facts)."""
    if not facts:
        return FaithfulnessReport.from_verdicts(candidate_index, ())
    payload = json.dumps([f.text for f in facts])
    request = ChatRequest(
        RoleTag.FACT_CHECKER,
        (("user", f"Verify each fact against the image.\n<facts>{payload}</facts>"),),
        attachments=(candidate,),
    )
    verdicts = parse_fact_checker_output(gateway.chat(request), facts)
    return FaithfulnessReport.from_verdicts(candidate_index, verdicts)


def select_artifact(
    candidates: Sequence[Canvas], reports: Sequence[FaithfulnessReport]
) -> tuple[Canvas, FaithfulnessReport]:
    """Argmax over phi; ties broken by lowest candidate index."""
    if not candidates or len(candidates) != len(reports):
        raise ValueError("candidates and reports must align and be non-empty")
    best = 0
    for i in range(1, len(reports)):
        if reports[i].phi > reports[best].phi:
            best = i
    return candidates[best], reports[best]


def normalize_canvas(
    canvas: Canvas,
    palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Canvas:
    """Snap pixels within `tolerance` (Euclidean RGB) of a palette color to
    that color; other pixels and the registry are untouched."""
    if not palette:
        raise ValueError("palette must be non-empty")
    arr = canvas_to_array(canvas).astype(np.float64)
    flat = arr.reshape(-1, 3)
    pal = np.asarray(palette, dtype=np.float64)
    dists = np.linalg.norm(flat[:, None, :] - pal[None, :, :], axis=2)
    nearest = np.argmin(dists, axis=1)
    within = dists[np.arange(len(flat)), nearest] <= tolerance
    flat[within] = pal[nearest[within]]
    out = flat.reshape(arr.shape).astype(np.uint8)
    return canvas_from_array(out, canvas.object_registry)


def summarize_scene(
    descriptor: str,
    previous_summary: Optional[str],
    gateway: ModelGateway,
    scene: str = "",
) -> str:
    """Dense propositional summary: creation paragraph or incremental rewrite."""
    if not descriptor.strip():
        raise ValueError("scene descriptor must be non-empty")
    mode = "update" if previous_summary else "creation"
    prompt = (
        f"<mode>{mode}</mode>\n"
        f"<scene>{scene}</scene>\n"
        f"<previous>{previous_summary or ''}</previous>\n"
        f"<target>{descriptor}</target>"
    )
    request = ChatRequest(RoleTag.SUMMARIZER, (("user", prompt),))
    return parse_scene_output(gateway.chat(request))


@dataclass(frozen=True)
class ConstructionResult:
    version: ArtifactVersion
    report: Optional[FaithfulnessReport]  # absent in the textual condition


def construct(
    decision: ObserverDecision,
    target: FrameId,
    previous_version: Optional[ArtifactVersion],
    prompt_history: Sequence[str],
    condition: str,
    gateway: ModelGateway,
    created_at_turn: int,
    j_candidates: int = DEFAULT_CANDIDATES,
    palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ConstructionResult:
    """Full generate-verify-select for one decision under the run condition
    (`visual`, `textual`, or `both`)."""
    if decision.action not in (EditAction.NEW, EditAction.CONTINUE):
        raise ValueError("construct requires a NEW or CONTINUE decision")
    if condition not in ("visual", "textual", "both"):
        raise ValueError(f"unknown condition: {condition!r}")
    canvas: Optional[Canvas] = None
    summary: Optional[str] = None
    report: Optional[FaithfulnessReport] = None
    prompt = ""
    if condition in ("visual", "both"):
        if previous_version is None or previous_version.canvas is None:
            prompt = build_creation_prompt(decision.scene_descriptor, decision.frame_meta)
        else:
            prompt = build_edit_prompt(
                decision.scene_descriptor,
                prompt_history,
                previous_version.canvas.object_registry,
            )
        facts = decompose_facts(
            decision.scene_descriptor, list(prompt_history) + [prompt], gateway, target
        )
        candidates = generate_candidates(
            decision.scene_descriptor, previous_version, j_candidates, gateway, prompt
        )
        reports = [
            faithfulness(candidate, facts, gateway, candidate_index=i)
            for i, candidate in enumerate(candidates)
        ]
        winner, report = select_artifact(candidates, reports)
        canvas = normalize_canvas(winner, palette, tolerance)
    if condition in ("textual", "both"):
        previous_summary = previous_version.summary if previous_version else None
        summary = summarize_scene(
            decision.scene_descriptor, previous_summary, gateway, scene=decision.frame_meta
        )
        if condition == "textual":
            prompt = decision.scene_descriptor
    metadata = decision.metadata
    if previous_version and previous_version.metadata:
        metadata = (
            previous_version.metadata + "\n" + metadata
            if metadata
            else previous_version.metadata
        )
    version = ArtifactVersion(
        frame_id=target,
        canvas=canvas,
        summary=summary,
        prompt=prompt,
        metadata=metadata,
        created_at_turn=created_at_turn,
    )
    return ConstructionResult(version=version, report=report)
