"""Small rule lexicon for the deterministic mock suite.

Scene and object vocabularies, color/adjective words, and a pattern-based
entity extractor. The live backends do not use any of this; it exists so the
mock pipeline can segment, render, and verify desk-scale dialogues without a
model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

COLOR_WORDS = {
    "red", "blue", "green", "yellow", "white", "black", "brown", "grey",
    "gray", "pink", "purple", "orange", "beige", "tan", "gold", "silver",
}

ADJECTIVE_WORDS = COLOR_WORDS | {
    "striped", "stripped", "wooden", "small", "large", "big", "tall", "round",
}

# Multi-word entries must come before their single-word suffixes.
SCENE_NOUNS = [
    "home office", "living room", "dining room", "childs room", "child's room",
    "bedroom", "kitchen", "bathroom", "basement", "hallway", "garage",
    "attic", "office", "hall", "outside",
]

OBJECT_NOUNS = [
    "drum set", "stair case", "book shelf",
    "staircase", "stairs", "stair", "guitars", "guitar", "desk", "bed",
    "nightstand", "lamp", "window", "wall", "floor", "rug", "toilet", "tub",
    "sink", "sofa", "couch", "cat", "moon", "bedspread", "tv", "table",
    "chair", "painting", "mirror", "shelf", "plant", "door", "counter",
    "stove", "fridge", "car", "piano", "fireplace", "bookshelf",
]

_NOUN_CANONICAL = {
    "stair case": "staircase",
    "stairs": "staircase",
    "stair": "staircase",
    "book shelf": "bookshelf",
    "child's room": "childs room",
    "gray": "grey",
}

# Objects assumed (blue outline) when a scene is opened with no explicit content.
ROOM_DEFAULTS = {
    "bedroom": ["bed", "nightstand", "lamp"],
    "home office": ["desk"],
    "office": ["desk"],
    "kitchen": ["stove"],
    "bathroom": ["sink"],
    "living room": ["sofa"],
    "dining room": ["table"],
}

STOPWORDS = {
    "a", "an", "the", "is", "are", "was", "were", "it", "its", "it's", "in",
    "on", "at", "of", "to", "and", "or", "my", "your", "mine", "yours", "me",
    "you", "i", "im", "i'm", "has", "have", "had", "also", "there", "here",
    "that", "this", "like", "what", "which", "who", "where", "when", "how",
    "can", "could", "do", "does", "did", "will", "would", "please", "tell",
    "remind", "remember", "recall", "find", "with", "for", "from", "get",
    "got", "be", "been", "am", "so", "ok", "okay", "yeah", "no", "not",
    "present", "room",
}

_WORD_RE = re.compile(r"[a-z0-9']+")


def canonical_noun(noun: str) -> str:
    return _NOUN_CANONICAL.get(noun, noun)


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def keywords(text: str) -> list[str]:
    """Content tokens of a sentence: stopwords dropped, order preserved."""
    seen = set()
    out = []
    for token in tokenize(text):
        token = canonical_noun(token)
        if token in STOPWORDS or token in seen:
            continue
        seen.add(token)
        out.append(token)
    return out


def find_scene(text: str) -> Optional[str]:
    """First scene noun mentioned in the text, canonical form."""
    lowered = " ".join(tokenize(text))
    for noun in SCENE_NOUNS:
        if re.search(rf"\b{re.escape(noun)}\b", lowered):
            return canonical_noun(noun)
    return None


@dataclass
class EntityMention:
    name: str
    attributes: list[str] = field(default_factory=list)
    position: Optional[str] = None  # e.g. "on the wall"


_POSITION_RE = re.compile(
    r"^\s*(on|under|near|beside|behind|above|at)\s+(a|an|the)?\s*([a-z]+(?: [a-z]+)?)"
)


def extract_entities(text: str) -> list[EntityMention]:
    """Pattern-based object extraction: known nouns with preceding adjectives
    and an optional trailing position phrase."""
    lowered = " ".join(tokenize(text))
    spans: list[tuple[int, int, str]] = []
    taken: list[tuple[int, int]] = []
    for noun in OBJECT_NOUNS:
        for m in re.finditer(rf"\b{re.escape(noun)}\b", lowered):
            if any(m.start() < e and m.end() > s for s, e in taken):
                continue
            taken.append((m.start(), m.end()))
            spans.append((m.start(), m.end(), canonical_noun(noun)))
    spans.sort()
    mentions = []
    position_spans: list[tuple[int, int]] = []
    for start, end, name in spans:
        preceding = tokenize(lowered[:start])
        attrs: list[str] = []
        for token in reversed(preceding):
            token = canonical_noun(token)
            if token in ADJECTIVE_WORDS:
                attrs.insert(0, token)
            elif token == "and" and attrs:
                continue
            else:
                break
        position = None
        pos = _POSITION_RE.match(lowered[end:])
        if pos:
            target = pos.group(3)
            vocabulary = SCENE_NOUNS + OBJECT_NOUNS
            # Exact matches beat prefix matches ("bed" must not become "bedroom").
            noun = next((n for n in vocabulary if target == n), None)
            if noun is None:
                noun = next(
                    (
                        n
                        for n in vocabulary
                        if target.startswith(n + " ") or n.startswith(target)
                    ),
                    None,
                )
            if noun is not None:
                article = pos.group(2) or ""
                position = f"{pos.group(1)} {article} {canonical_noun(noun)}".replace("  ", " ")
                position_spans.append((end, end + pos.end()))
        mentions.append(EntityMention(name=name, attributes=attrs, position=position))
    # Nouns consumed inside another mention's position phrase are not objects
    # of their own ("a red cat on a sofa" describes the cat, not the sofa).
    kept = []
    for (start, end, _), mention in zip(spans, mentions):
        if any(ps <= start and end <= pe for ps, pe in position_spans):
            continue
        kept.append(mention)
    return kept


def color_of(attributes) -> Optional[str]:
    for attr in attributes:
        if attr in COLOR_WORDS:
            return attr
    return None
