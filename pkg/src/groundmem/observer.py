"""Phase-1 segmentation: context windows, per-utterance edit decisions, and
routing of NEW/CONTINUE/SKIP actions onto the dual per-speaker frame state."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import (
    EditAction,
    FrameId,
    GroundMemError,
    ObserverDecision,
    SpeakerId,
    Utterance,
)
from .gateway import ChatRequest, ModelGateway, RoleTag
from .parsers import parse_observer_output

log = logging.getLogger(__name__)

SCENE_CHANGE_TOKEN = "<scene_change>"


class ContinueWithoutActiveFrame(GroundMemError):
    """CONTINUE routed for a speaker that has no active frame yet."""


@dataclass
class SpeakerFrames:
    """Mutable per-speaker side of the segmentation state."""

    active_frame: Optional[FrameId] = None
    next_ordinal: int = 1
    latest_sequence: dict[FrameId, int] = field(default_factory=dict)
    frame_turn_spans: dict[FrameId, list[int]] = field(default_factory=dict)
    frame_order: list[FrameId] = field(default_factory=list)
    frame_meta: dict[FrameId, str] = field(default_factory=dict)


@dataclass
class PerspectiveState:
    """Both speakers' frame sequences, maintained from one viewpoint."""

    sides: dict[SpeakerId, SpeakerFrames] = field(
        default_factory=lambda: {s: SpeakerFrames() for s in SpeakerId}
    )

    def side(self, speaker: SpeakerId) -> SpeakerFrames:
        return self.sides[speaker]

    def seed_frame(
        self, speaker: SpeakerId, ordinal: int, meta: str, turns: Sequence[int]
    ) -> FrameId:
        """Materialize a frame that predates the replayed window (resuming a
        dialogue mid-stream); ordinals below it are simply never allocated."""
        side = self.side(speaker)
        frame = FrameId(speaker, ordinal)
        side.latest_sequence[frame] = 1
        side.frame_turn_spans[frame] = list(turns)
        side.frame_order.append(frame)
        side.frame_meta[frame] = meta
        side.active_frame = frame
        side.next_ordinal = max(side.next_ordinal, ordinal + 1)
        return frame


@dataclass(frozen=True)
class RoutingOutcome:
    target: Optional[FrameId]  # versioned id of the artifact to build
    allocation: bool  # True when a new frame was opened


def build_context_window(
    dialogue: Sequence[Utterance], state: PerspectiveState, speaker: SpeakerId
) -> list[str]:
    """Utterances of the speaker's active frame, preceded by the previous
    frame's utterances with a `<scene_change>` token at the boundary."""
    side = state.side(speaker)
    if side.active_frame is None:
        return []
    text_by_turn = {u.turn_index: u.text for u in dialogue}
    order = side.frame_order
    active = side.active_frame
    position = order.index(active)
    lines: list[str] = []
    if position > 0:
        previous = order[position - 1]
        lines.extend(
            text_by_turn[t] for t in side.frame_turn_spans[previous] if t in text_by_turn
        )
        lines.append(SCENE_CHANGE_TOKEN)
    lines.extend(
        text_by_turn[t] for t in side.frame_turn_spans[active] if t in text_by_turn
    )
    return lines


def observe(
    u: Utterance,
    H: Sequence[str],
    gateway: ModelGateway,
    active_scene: str = "",
    parse_retries: int = 2,
) -> ObserverDecision:
    """One edit decision for utterance u given its context window."""
    prompt = (
        "Decide whether this utterance opens a new scene, updates the active "
        "scene, or warrants no update.\n"
        f"<context>{chr(10).join(H)}</context>\n"
        f"<active_scene>{active_scene or 'none'}</active_scene>\n"
        f'<target speaker="{u.speaker.value}">{u.text}</target>'
    )
    request = ChatRequest(RoleTag.OBSERVER, (("user", prompt),))
    last_error: Optional[Exception] = None
    for attempt in range(parse_retries + 1):
        raw = gateway.chat(request)
        try:
            return parse_observer_output(raw)
        except GroundMemError as exc:
            last_error = exc
            log.warning(
                "observer parse failure (turn %d, attempt %d): %s",
                u.turn_index,
                attempt + 1,
                exc,
            )
    log.warning(
        "observer output unusable after %d attempts at turn %d (%s); falling back to SKIP",
        parse_retries + 1,
        u.turn_index,
        last_error,
    )
    return ObserverDecision(action=EditAction.SKIP)


def route(
    decision: ObserverDecision, u: Utterance, state: PerspectiveState
) -> RoutingOutcome:
    """Apply a decision to the utterance speaker's side of the state."""
    side = state.side(u.speaker)
    if decision.action is EditAction.SKIP:
        return RoutingOutcome(target=None, allocation=False)
    if decision.action is EditAction.NEW:
        frame = FrameId(u.speaker, side.next_ordinal)
        side.next_ordinal += 1
        side.active_frame = frame
        side.latest_sequence[frame] = 1
        side.frame_turn_spans[frame] = [u.turn_index]
        side.frame_order.append(frame)
        side.frame_meta[frame] = decision.frame_meta
        return RoutingOutcome(target=frame, allocation=True)
    # CONTINUE
    if side.active_frame is None:
        raise ContinueWithoutActiveFrame(
            f"CONTINUE from {u.speaker.value} before any NEW"
        )
    frame = side.active_frame
    sequence = side.latest_sequence[frame] + 1
    side.latest_sequence[frame] = sequence
    side.frame_turn_spans[frame].append(u.turn_index)
    return RoutingOutcome(target=frame.with_sequence(sequence), allocation=False)
