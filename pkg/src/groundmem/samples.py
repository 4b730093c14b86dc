"""Built-in sample dialogues and QA items.

Three small two-speaker room-tour dialogues exercising the main behaviors:
scene segmentation with a cross-frame movement relation, perspective
isolation between speakers, and attribute updates on a revisited scene.
Each dialogue resumes mid-stream, so earlier frames arrive as seeds.
"""

from __future__ import annotations

import json
from typing import Sequence

from .core import QAItem, RelationType, SpeakerId, Utterance
from .pipeline import Dialogue, SeedFrame


def _dialogue(dialogue_id, seeds, turns) -> Dialogue:
    return Dialogue(
        dialogue_id=dialogue_id,
        utterances=tuple(
            Utterance(turn_index=t, speaker=SpeakerId(s), text=text)
            for t, s, text in turns
        ),
        seeds=tuple(seeds),
    )


OFFICE_TOUR = _dialogue(
    "office_tour",
    seeds=[
        SeedFrame(
            speaker=SpeakerId.B,
            ordinal=2,
            scene="kitchen",
            descriptor="I'm in a kitchen",
            turns=((20, "I'm in a kitchen"), (21, "It has a stove I think")),
        )
    ],
    turns=[
        (26, "B", "Im in a home office"),
        (27, "B", "ok let me move around"),
        (28, "B", "It also has a drum set in it"),
        (29, "B", "There are two guitars on the wall"),
        (30, "B", "I moved north from a kitchen to get here"),
    ],
)

BASEMENT_TOUR = _dialogue(
    "basement_tour",
    seeds=[
        SeedFrame(
            speaker=SpeakerId.A,
            ordinal=4,
            scene="hallway",
            descriptor="I'm in a hallway",
            turns=((10, "I'm in a hallway"),),
        ),
        SeedFrame(
            speaker=SpeakerId.B,
            ordinal=3,
            scene="garage",
            descriptor="I'm in the garage",
            turns=((11, "I'm in the garage"),),
        ),
    ],
    turns=[
        (15, "A", "I made it to the childs room"),
        (16, "B", "I'm in the basement"),
        (17, "B", "Has a white staircase?"),
        (18, "A", "no"),
        (19, "A", "mine has wooden brown stair case"),
    ],
)

BATHROOM_REVISIT = _dialogue(
    "bathroom_revisit",
    seeds=[
        SeedFrame(
            speaker=SpeakerId.A,
            ordinal=1,
            scene="bedroom",
            descriptor="I'm in a bedroom",
            turns=((3, "I'm in a bedroom"),),
        ),
        SeedFrame(
            speaker=SpeakerId.B,
            ordinal=2,
            scene="bathroom",
            descriptor="west gets me bathroom. It has a red rug",
            turns=((7, "west gets me bathroom. It has a red rug"),),
        ),
    ],
    turns=[
        (18, "B", "In the bathroom again"),
        (19, "B", "It has a white toilet and yellow rug now"),
        (20, "A", "maybe it is the same room"),
        (21, "A", "yeah"),
        (22, "B", "There is a red tub at back"),
    ],
)

SAMPLE_DIALOGUES = (OFFICE_TOUR, BASEMENT_TOUR, BATHROOM_REVISIT)

SAMPLE_QA = (
    QAItem(
        question="Was there a drum set in your home office?",
        gold_answer="yes",
        relation_type=RelationType.TEMPORAL,
        questioner=SpeakerId.A,
        dialogue_id="office_tour",
    ),
    QAItem(
        question="Is the home office north of the kitchen?",
        gold_answer="yes",
        relation_type=RelationType.SPATIAL,
        questioner=SpeakerId.A,
        dialogue_id="office_tour",
    ),
    QAItem(
        question="Which room is north of the kitchen?",
        gold_answer="home office",
        relation_type=RelationType.INFERRED,
        questioner=SpeakerId.A,
        dialogue_id="office_tour",
    ),
    QAItem(
        question="What was the color of the stair in my basement like?",
        gold_answer="It was white",
        relation_type=RelationType.ATTRIBUTIVE,
        questioner=SpeakerId.B,
        dialogue_id="basement_tour",
    ),
    QAItem(
        question="Was there a staircase in your basement?",
        gold_answer="yes",
        relation_type=RelationType.TEMPORAL,
        questioner=SpeakerId.A,
        dialogue_id="basement_tour",
    ),
    QAItem(
        question="Can you remind me of the color of the rug present in the red tub room?",
        gold_answer="It was yellow",
        relation_type=RelationType.ATTRIBUTIVE,
        questioner=SpeakerId.A,
        dialogue_id="bathroom_revisit",
    ),
    QAItem(
        question="What color was the tub in your bathroom?",
        gold_answer="It was red",
        relation_type=RelationType.ATTRIBUTIVE,
        questioner=SpeakerId.A,
        dialogue_id="bathroom_revisit",
    ),
)


def dialogue_to_record(dialogue: Dialogue) -> dict:
    record = {
        "dialogue_id": dialogue.dialogue_id,
        "turns": [
            {"turn": u.turn_index, "speaker": u.speaker.value, "text": u.text}
            for u in dialogue.utterances
        ],
    }
    if dialogue.seeds:
        record["initial_frames"] = [
            {
                "speaker": seed.speaker.value,
                "ordinal": seed.ordinal,
                "scene": seed.scene,
                "descriptor": seed.descriptor,
                "turns": [{"turn": t, "text": text} for t, text in seed.turns],
            }
            for seed in dialogue.seeds
        ]
    return record


def qa_to_record(item: QAItem) -> dict:
    return {
        "dialogue_id": item.dialogue_id,
        "question": item.question,
        "gold_answer": item.gold_answer,
        "relation_type": item.relation_type.value,
        "questioner": item.questioner.value,
    }


def write_transcripts(path: str, dialogues: Sequence[Dialogue] = SAMPLE_DIALOGUES) -> None:
    with open(path, "w") as fh:
        for dialogue in dialogues:
            fh.write(json.dumps(dialogue_to_record(dialogue)) + "\n")


def write_qa(path: str, items: Sequence[QAItem] = SAMPLE_QA) -> None:
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(qa_to_record(item)) + "\n")
