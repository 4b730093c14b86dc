"""Phase-1 driver: replays a dialogue utterance by utterance, building the
memory bank, the triplet graph, and the per-utterance decision log."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import constructor, observer
from .core import (
    EditAction,
    FaithfulnessReport,
    FrameId,
    ObserverDecision,
    SpeakerId,
    Utterance,
)
from .gateway import ModelGateway
from .linker import TripletGraph, extract_links
from .memory import MemoryBank

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeedFrame:
    """A frame that predates the replayed window, given when a transcript
    resumes a dialogue mid-stream."""

    speaker: SpeakerId
    ordinal: int
    scene: str
    descriptor: str
    turns: tuple[tuple[int, str], ...] = ()  # (turn_index, text)


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    utterances: tuple[Utterance, ...]
    seeds: tuple[SeedFrame, ...] = ()


@dataclass
class BuildResult:
    bank: MemoryBank
    graph: TripletGraph
    state: observer.PerspectiveState
    decisions: list[tuple[int, ObserverDecision]] = field(default_factory=list)
    reports: list[FaithfulnessReport] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def mean_phi(self) -> Optional[float]:
        if not self.reports:
            return None
        return sum(r.phi for r in self.reports) / len(self.reports)


class PhaseOneBuilder:
    """Sequential per-dialogue builder; one instance may build many dialogues."""

    def __init__(
        self,
        gateway: ModelGateway,
        condition: str = "visual",
        j_candidates: int = constructor.DEFAULT_CANDIDATES,
        palette: Sequence[tuple[int, int, int]] = constructor.DEFAULT_PALETTE,
        tolerance: float = constructor.DEFAULT_TOLERANCE,
    ):
        if condition not in ("visual", "textual", "both"):
            raise ValueError(f"unknown condition: {condition!r}")
        self.gateway = gateway
        self.condition = condition
        self.j_candidates = j_candidates
        self.palette = palette
        self.tolerance = tolerance

    def build(self, dialogue: Dialogue) -> BuildResult:
        state = observer.PerspectiveState()
        bank = MemoryBank()
        graph = TripletGraph()
        result = BuildResult(bank=bank, graph=graph, state=state)
        prompt_history: dict[FrameId, list[str]] = {}

        seed_utterances = [
            Utterance(turn_index=t, speaker=seed.speaker, text=text)
            for seed in dialogue.seeds
            for t, text in seed.turns
        ]
        all_utterances = tuple(seed_utterances) + dialogue.utterances

        for seed in dialogue.seeds:
            frame = state.seed_frame(
                seed.speaker, seed.ordinal, seed.scene, [t for t, _ in seed.turns]
            )
            bank.allocate(frame)
            graph.register_frame(frame)
            decision = ObserverDecision(
                action=EditAction.NEW,
                scene_descriptor=seed.descriptor,
                metadata=seed.scene,
                frame_meta=seed.scene,
            )
            first_turn = seed.turns[0][0] if seed.turns else 0
            built = constructor.construct(
                decision,
                frame,
                None,
                [],
                self.condition,
                self.gateway,
                first_turn,
                j_candidates=self.j_candidates,
                palette=self.palette,
                tolerance=self.tolerance,
            )
            bank.insert(built.version, self.gateway)
            prompt_history[frame] = [built.version.prompt]
            if built.report is not None:
                result.reports.append(built.report)

        for u in dialogue.utterances:
            side = state.side(u.speaker)
            active_scene = (
                side.frame_meta.get(side.active_frame, "") if side.active_frame else ""
            )
            window = observer.build_context_window(all_utterances, state, u.speaker)
            decision = observer.observe(u, window, self.gateway, active_scene)
            result.decisions.append((u.turn_index, decision))
            outcome = observer.route(decision, u, state)
            if outcome.target is not None:
                base = outcome.target.base()
                previous = None
                if outcome.allocation:
                    bank.allocate(base)
                    graph.register_frame(base)
                    prompt_history.setdefault(base, [])
                else:
                    previous = bank.latest(base)
                built = constructor.construct(
                    decision,
                    outcome.target,
                    previous,
                    prompt_history[base],
                    self.condition,
                    self.gateway,
                    u.turn_index,
                    j_candidates=self.j_candidates,
                    palette=self.palette,
                    tolerance=self.tolerance,
                )
                bank.insert(built.version, self.gateway)
                prompt_history[base].append(built.version.prompt)
                if built.report is not None:
                    result.reports.append(built.report)
            if decision.relation_hint:
                self._link(decision.relation_hint, window, u.speaker, state, graph, result)
        return result

    def _link(
        self,
        hint: str,
        window: list[str],
        speaker: SpeakerId,
        state: observer.PerspectiveState,
        graph: TripletGraph,
        result: BuildResult,
    ) -> None:
        side = state.side(speaker)
        curr = side.active_frame
        if curr is None:
            result.diagnostics.append(f"relation hint with no active frame: {hint!r}")
            return
        position = side.frame_order.index(curr)
        prev = side.frame_order[position - 1] if position > 0 else None
        triplets = extract_links(
            hint,
            window,
            {"prev": prev, "curr": curr, "next": None},
            side.frame_meta,
            self.gateway,
        )
        for triplet in triplets:
            graph.insert_triplet(triplet)
