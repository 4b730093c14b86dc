"""Cross-frame relation extraction and the queryable triplet graph."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import FrameId, GroundMemError, MalformedFrameId, Triplet, parse_frame_id
from .gateway import ChatRequest, ModelGateway, RoleTag
from .parsers import parse_linker_output

log = logging.getLogger(__name__)

CANONICAL_PREDICATES = frozenset(
    {
        "is_north_of",
        "is_south_of",
        "is_east_of",
        "is_west_of",
        "is_next_to",
        "is_same_as",
        "is_revisit_of",
    }
)

_PREDICATE_ALIASES = {
    "north_of": "is_north_of",
    "south_of": "is_south_of",
    "east_of": "is_east_of",
    "west_of": "is_west_of",
    "next_to": "is_next_to",
    "same_as": "is_same_as",
    "revisit_of": "is_revisit_of",
}

PREDICATE_INVERSES = {
    "is_north_of": "is_south_of",
    "is_south_of": "is_north_of",
    "is_east_of": "is_west_of",
    "is_west_of": "is_east_of",
    "is_next_to": "is_next_to",
    "is_same_as": "is_same_as",
}


class UnknownFrame(GroundMemError):
    """Query against a frame the graph has never seen."""


class UnknownPredicate(GroundMemError):
    """Predicate outside the canonical vocabulary after normalization."""


def normalize_predicate(raw: str) -> str:
    cleaned = re.sub(r"[^a-z0-9]+", "_", raw.strip().lower()).strip("_")
    cleaned = _PREDICATE_ALIASES.get(cleaned, cleaned)
    if cleaned not in CANONICAL_PREDICATES:
        raise UnknownPredicate(f"predicate outside canonical vocabulary: {raw!r}")
    return cleaned


@dataclass
class TripletGraph:
    """Idempotent triplet store over frames registered with the bank."""

    known_frames: set[FrameId] = field(default_factory=set)
    _triplets: list[Triplet] = field(default_factory=list)
    _seen: set[Triplet] = field(default_factory=set)

    def register_frame(self, frame: FrameId) -> None:
        self.known_frames.add(frame.base())

    def insert_triplet(self, triplet: Triplet) -> None:
        if triplet.subject.base() not in self.known_frames:
            raise UnknownFrame(f"unknown subject frame: {triplet.subject}")
        if triplet.object.base() not in self.known_frames:
            raise UnknownFrame(f"unknown object frame: {triplet.object}")
        if triplet in self._seen:
            return
        self._seen.add(triplet)
        self._triplets.append(triplet)

    def neighbors(
        self, frame: FrameId, predicate: Optional[str] = None
    ) -> list[Triplet]:
        """Triplets incident to `frame`, in insertion order; a predicate filter
        also accepts the stored inverse orientation."""
        if frame.base() not in self.known_frames:
            raise UnknownFrame(f"unknown frame: {frame}")
        base = frame.base()
        out = []
        for t in self._triplets:
            if t.subject.base() != base and t.object.base() != base:
                continue
            if predicate is not None:
                wanted = normalize_predicate(predicate)
                if t.predicate != wanted and PREDICATE_INVERSES.get(t.predicate) != wanted:
                    continue
            out.append(t)
        return out

    def triplets_for(self, hits: Sequence[FrameId]) -> list[Triplet]:
        """Deduplicated union of triplets incident to any hit frame, ordered
        by (subject, predicate, object)."""
        bases = {h.base() for h in hits}
        found = {
            t
            for t in self._triplets
            if t.subject.base() in bases or t.object.base() in bases
        }
        return sorted(
            found, key=lambda t: (t.subject.sort_key, t.predicate, t.object.sort_key)
        )

    def all_triplets(self) -> list[Triplet]:
        return list(self._triplets)

    def __len__(self) -> int:
        return len(self._triplets)


def extract_links(
    relation_hint: str,
    H: Sequence[str],
    frame_context: dict,
    frame_meta_table: dict[FrameId, str],
    gateway: ModelGateway,
) -> list[Triplet]:
    """Ask the linker model for triplets over the provided frame ids; invalid
    candidates are dropped with diagnostics, never raised."""
    curr = frame_context.get("curr")
    if curr is None:
        raise ValueError("linker requires a current frame")
    prev = frame_context.get("prev")
    nxt = frame_context.get("next")
    allowed = {f.base().render() for f in (prev, curr, nxt) if f is not None}
    meta = {f.base().render(): m for f, m in frame_meta_table.items()}
    prompt = (
        "Extract cross-frame relations.\n"
        f"<directive>{relation_hint}</directive>\n"
        f"<context>{chr(10).join(H)}</context>\n"
        f"<prev_frame>{prev.base().render() if prev else 'None'}</prev_frame>\n"
        f"<curr_frame>{curr.base().render()}</curr_frame>\n"
        f"<next_frame>{nxt.base().render() if nxt else 'None'}</next_frame>\n"
        f"<frame_meta>{json.dumps(meta)}</frame_meta>"
    )
    request = ChatRequest(RoleTag.LINKER, (("user", prompt),))
    candidates = parse_linker_output(gateway.chat(request))
    triplets: list[Triplet] = []
    for cand in candidates:
        try:
            subject = parse_frame_id(cand["subject"])
            obj = parse_frame_id(cand["object"])
            predicate = normalize_predicate(cand["predicate"])
        except (MalformedFrameId, UnknownPredicate) as exc:
            log.warning("dropping malformed triplet candidate %r: %s", cand, exc)
            continue
        if subject.base().render() not in allowed or obj.base().render() not in allowed:
            log.warning("dropping triplet referencing frame outside context: %r", cand)
            continue
        if subject.base() == obj.base():
            log.warning("dropping self-referential triplet: %r", cand)
            continue
        triplets.append(Triplet(subject.base(), predicate, obj.base()))
    return triplets
