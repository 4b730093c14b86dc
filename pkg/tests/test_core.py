"""Domain types: frame-id grammar, plan validation, closed enumerations."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundmem.core import (
    Annotation,
    EditAction,
    FaithfulnessReport,
    FactVerdict,
    AtomicFact,
    FrameId,
    MalformedFrameId,
    ObserverDecision,
    Plan,
    PlanCommand,
    PlanStep,
    RelationType,
    SpeakerId,
    UnknownLabel,
    Utterance,
    parse_frame_id,
    validate_plan,
)

frame_ids = st.builds(
    FrameId,
    speaker=st.sampled_from(list(SpeakerId)),
    ordinal=st.integers(min_value=1, max_value=10_000),
    sequence=st.integers(min_value=1, max_value=100),
)


class TestFrameId:
    def test_canonical_forms(self):
        assert parse_frame_id("B_3") == FrameId(SpeakerId.B, 3, 1)
        assert parse_frame_id("B_1_seq2") == FrameId(SpeakerId.B, 1, 2)
        assert FrameId(SpeakerId.B, 3).render() == "B_3"
        assert FrameId(SpeakerId.B, 1, 2).render() == "B_1_seq2"

    @pytest.mark.parametrize(
        "bad", ["C_1", "A_0", "B_1_seq0", "B", "A_1_seq", "a_1", "B_01", "B_1_SEQ2", ""]
    )
    def test_malformed(self, bad):
        with pytest.raises(MalformedFrameId):
            parse_frame_id(bad)

    @given(frame_ids)
    def test_round_trip(self, frame_id):
        assert parse_frame_id(frame_id.render()) == frame_id

    @given(st.lists(frame_ids, min_size=2, max_size=10))
    def test_sort_key_total_order(self, ids):
        ordered = sorted(ids, key=lambda f: f.sort_key)
        for a, b in zip(ordered, ordered[1:]):
            assert a.sort_key <= b.sort_key

    def test_base_and_sequence(self):
        f = FrameId(SpeakerId.A, 5, 3)
        assert f.base() == FrameId(SpeakerId.A, 5, 1)
        assert f.with_sequence(7).sequence == 7


class TestUtterance:
    def test_rejects_blank_text(self):
        with pytest.raises(ValueError):
            Utterance(turn_index=0, speaker=SpeakerId.A, text="   ")

    def test_rejects_negative_turn(self):
        with pytest.raises(ValueError):
            Utterance(turn_index=-1, speaker=SpeakerId.A, text="hi")


class TestClosedEnums:
    def test_edit_action_parse(self):
        assert EditAction.parse("[NEW]") is EditAction.NEW
        assert EditAction.parse("skip") is EditAction.SKIP
        with pytest.raises(UnknownLabel):
            EditAction.parse("[DANCE]")

    def test_relation_type_closed(self):
        assert RelationType.parse("Spatial") is RelationType.SPATIAL
        with pytest.raises(UnknownLabel):
            RelationType.parse("Causal")
        with pytest.raises(UnknownLabel):
            RelationType.parse("spatial")  # labels are case-sensitive

    def test_speaker_closed(self):
        with pytest.raises(UnknownLabel):
            SpeakerId.parse("C")

    def test_annotation_vocabulary_closed(self):
        with pytest.raises(UnknownLabel):
            Annotation("local", "binary", "free", "sometimes")


class TestObserverDecision:
    def test_skip_carries_no_descriptor(self):
        with pytest.raises(ValueError):
            ObserverDecision(action=EditAction.SKIP, scene_descriptor="a room")

    def test_new_requires_descriptor(self):
        with pytest.raises(ValueError):
            ObserverDecision(action=EditAction.NEW, scene_descriptor="")


class TestFaithfulnessReport:
    def test_phi_counts(self):
        fact = AtomicFact("There is a desk", FrameId(SpeakerId.B, 1))
        verdicts = [FactVerdict(fact, True), FactVerdict(fact, False)]
        assert FaithfulnessReport.from_verdicts(0, verdicts).phi == 0.5

    def test_phi_empty_is_one(self):
        assert FaithfulnessReport.from_verdicts(0, ()).phi == 1.0


def _plan(*steps) -> Plan:
    return Plan(tuple(steps))


POV = lambda: PlanStep(PlanCommand.POV, "A")
RAG = lambda n=5: PlanStep(PlanCommand.RAG, "x", retrieval_count=n)
FINAL = lambda: PlanStep(PlanCommand.FINAL_ANSWER, "answer")
PROCESS = lambda: PlanStep(PlanCommand.PROCESS, "sort")


class TestValidatePlan:
    def test_well_formed(self):
        assert validate_plan(_plan(POV(), RAG(), FINAL())) == []

    def test_final_not_last(self):
        rules = [v.rule for v in validate_plan(_plan(FINAL(), RAG()))]
        assert "FINAL_ANSWER-not-last" in rules

    def test_missing_final(self):
        rules = [v.rule for v in validate_plan(_plan(POV(), PROCESS()))]
        assert rules == ["missing-FINAL_ANSWER"]

    def test_duplicate_final(self):
        rules = [v.rule for v in validate_plan(_plan(FINAL(), FINAL()))]
        assert "duplicate-FINAL_ANSWER" in rules

    def test_rag_count_enforced_at_construction(self):
        with pytest.raises(ValueError):
            PlanStep(PlanCommand.RAG, "x", retrieval_count=0)
        with pytest.raises(ValueError):
            PlanStep(PlanCommand.POV, "A", retrieval_count=3)

    @given(
        st.lists(
            st.sampled_from(["POV", "RAG", "PROCESS", "FINAL_ANSWER"]),
            min_size=1,
            max_size=8,
        )
    )
    def test_sound_and_complete(self, commands):
        steps = tuple(
            PlanStep(
                PlanCommand[c], "x", retrieval_count=3 if c == "RAG" else None
            )
            for c in commands
        )
        violations = validate_plan(Plan(steps))
        conforms = commands.count("FINAL_ANSWER") == 1 and commands[-1] == "FINAL_ANSWER"
        assert (violations == []) == conforms
