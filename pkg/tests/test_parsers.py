"""Parser totality, padding robustness, repair pass, typed errors."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundmem.core import (
    Annotation,
    AtomicFact,
    EditAction,
    FrameId,
    GroundMemError,
    JudgeOutcome,
    PlanCommand,
    SpeakerId,
)
from groundmem.parsers import (
    MalformedRagCount,
    UnknownAction,
    UnknownCommand,
    UnparsableOutput,
    VerdictCountMismatch,
    extract_answer_span,
    iter_json_values,
    parse_annotator_output,
    parse_fact_checker_output,
    parse_fact_list,
    parse_judge_output,
    parse_linker_output,
    parse_observer_output,
    parse_planner_output,
    parse_scene_output,
)

PAD_PREFIX = "Sure! Here is the result you asked for:\n```json\n"
PAD_SUFFIX = "\n```\nLet me know if you need anything else."


class TestObserverParser:
    PAYLOAD = json.dumps(
        {
            "frame_meta": "home office",
            "relation": "",
            "imagery": "a home office",
            "action": "[NEW]",
        }
    )

    def test_plain(self):
        d = parse_observer_output(self.PAYLOAD)
        assert d.action is EditAction.NEW
        assert d.scene_descriptor == "a home office"
        assert d.frame_meta == "home office"
        assert d.relation_hint is None

    def test_padding_identical(self):
        plain = parse_observer_output(self.PAYLOAD)
        padded = parse_observer_output(PAD_PREFIX + self.PAYLOAD + PAD_SUFFIX)
        assert plain == padded

    def test_relation_hint(self):
        raw = json.dumps(
            {"frame_meta": "", "relation": "moved north from kitchen", "action": "SKIP"}
        )
        d = parse_observer_output(raw)
        assert d.action is EditAction.SKIP
        assert d.relation_hint == "moved north from kitchen"

    def test_unknown_action(self):
        with pytest.raises(UnknownAction):
            parse_observer_output('{"action": "REWIND", "imagery": "a room"}')

    def test_missing_payload(self):
        with pytest.raises(UnparsableOutput):
            parse_observer_output("no json here at all")

    def test_trailing_comma_repaired(self):
        raw = '{"action": "SKIP", "imagery": "",}'
        assert parse_observer_output(raw).action is EditAction.SKIP


class TestPlannerParser:
    RAW = (
        "<answer><item>POV B</item><item>RAG[5] staircase color</item>"
        "<item>FINAL_ANSWER What color is it?</item></answer>"
    )

    def test_plain(self):
        plan = parse_planner_output(self.RAW)
        commands = [s.command for s in plan.steps]
        assert commands == [PlanCommand.POV, PlanCommand.RAG, PlanCommand.FINAL_ANSWER]
        assert plan.steps[1].retrieval_count == 5
        assert plan.steps[1].instruction == "staircase color"

    def test_k_equals_form(self):
        plan = parse_planner_output(
            "<answer><item>RAG[k=3] rug</item><item>FINAL_ANSWER q</item></answer>"
        )
        assert plan.steps[0].retrieval_count == 3

    def test_padding_identical(self):
        assert parse_planner_output(self.RAW) == parse_planner_output(
            PAD_PREFIX + self.RAW + PAD_SUFFIX
        )

    def test_bad_rag_count(self):
        with pytest.raises(MalformedRagCount):
            parse_planner_output("<answer><item>RAG[lots] x</item></answer>")
        with pytest.raises(MalformedRagCount):
            parse_planner_output("<answer><item>RAG[0] x</item></answer>")

    def test_unknown_command(self):
        with pytest.raises(UnknownCommand):
            parse_planner_output("<answer><item>SUMMON help</item></answer>")

    def test_no_answer_span(self):
        with pytest.raises(UnparsableOutput):
            parse_planner_output("POV A RAG[5] x")


class TestLinkerParser:
    def test_plain_and_empty(self):
        raw = '{"triplets": [{"subject": "B_3", "predicate": "north_of", "object": "B_2"}]}'
        assert parse_linker_output(raw) == [
            {"subject": "B_3", "predicate": "north_of", "object": "B_2"}
        ]
        assert parse_linker_output('{"triplets": []}') == []

    def test_malformed_entry(self):
        with pytest.raises(UnparsableOutput):
            parse_linker_output('{"triplets": [{"subject": "B_3"}]}')

    def test_not_a_list(self):
        with pytest.raises(UnparsableOutput):
            parse_linker_output('{"triplets": "none"}')


class TestFactCheckerParser:
    FACTS = tuple(
        AtomicFact(t, FrameId(SpeakerId.B, 1)) for t in ("There is a desk", "The rug is red")
    )

    def test_plain(self):
        raw = json.dumps(
            [
                {"fact": "There is a desk", "verdict": True, "box": [0, 0, 10, 10]},
                {"fact": "The rug is red", "verdict": False, "box": None},
            ]
        )
        verdicts = parse_fact_checker_output(raw, self.FACTS)
        assert [v.verdict for v in verdicts] == [True, False]
        assert verdicts[0].box == (0, 0, 10, 10)
        assert verdicts[1].box is None

    def test_count_mismatch(self):
        raw = '[{"fact": "x", "verdict": true}]'
        with pytest.raises(VerdictCountMismatch):
            parse_fact_checker_output(raw, self.FACTS)

    def test_padding_identical(self):
        raw = '[{"fact": "a", "verdict": true}, {"fact": "b", "verdict": false}]'
        assert parse_fact_checker_output(raw, self.FACTS) == parse_fact_checker_output(
            PAD_PREFIX + raw + PAD_SUFFIX, self.FACTS
        )


class TestJudgeParser:
    def test_both_span_names(self):
        for tag in ("reasoning", "think"):
            raw = f"<{tag}>colors match</{tag}>\n<answer>SAME</answer>"
            v = parse_judge_output(raw)
            assert v.verdict is JudgeOutcome.SAME
            assert v.reasoning == "colors match"

    def test_verdict_without_answer_span(self):
        assert parse_judge_output("they are DIFFERENT.").verdict is JudgeOutcome.DIFFERENT

    def test_no_token(self):
        with pytest.raises(UnparsableOutput):
            parse_judge_output("<answer>maybe</answer>")


class TestAnnotatorParser:
    def test_plain(self):
        raw = json.dumps(
            {
                "complexity_type": "Local",
                "question_type": "binary",
                "constraint_type": "free",
                "validity_type": "valid",
            }
        )
        assert parse_annotator_output(raw) == Annotation("local", "binary", "free", "valid")

    def test_bad_label_propagates(self):
        raw = json.dumps(
            {
                "complexity_type": "global",
                "question_type": "binary",
                "constraint_type": "free",
                "validity_type": "valid",
            }
        )
        with pytest.raises(GroundMemError):
            parse_annotator_output(raw)


class TestSmallParsers:
    def test_fact_list(self):
        assert parse_fact_list('{"facts": ["a", "b"]}') == ["a", "b"]
        with pytest.raises(UnparsableOutput):
            parse_fact_list('{"facts": [1, 2]}')

    def test_scene(self):
        assert parse_scene_output('{"scene": "A tidy kitchen."}') == "A tidy kitchen."
        with pytest.raises(UnparsableOutput):
            parse_scene_output('{"scene": "  "}')

    def test_extract_answer_span(self):
        assert extract_answer_span("<answer> white </answer>") == "white"
        assert extract_answer_span("nothing tagged") == ""


class TestTotality:
    """Parsers never abort: they return or raise a GroundMemError subclass."""

    PARSERS = (
        parse_observer_output,
        parse_planner_output,
        parse_linker_output,
        parse_judge_output,
        parse_annotator_output,
        parse_fact_list,
        parse_scene_output,
    )

    @given(st.text(max_size=300))
    def test_fuzz_never_aborts(self, raw):
        for parser in self.PARSERS:
            try:
                parser(raw)
            except GroundMemError:
                pass
        try:
            parse_fact_checker_output(raw, self.FACTS_ONE)
        except GroundMemError:
            pass
        extract_answer_span(raw)
        list(iter_json_values(raw))

    FACTS_ONE = (AtomicFact("x", FrameId(SpeakerId.A, 1)),)

    @given(
        st.recursive(
            st.one_of(st.none(), st.booleans(), st.integers(), st.text(max_size=20)),
            lambda children: st.one_of(
                st.lists(children, max_size=4),
                st.dictionaries(st.text(max_size=8), children, max_size=4),
            ),
            max_leaves=12,
        )
    )
    def test_json_fuzz_never_aborts(self, value):
        raw = PAD_PREFIX + json.dumps(value) + PAD_SUFFIX
        for parser in self.PARSERS:
            try:
                parser(raw)
            except GroundMemError:
                pass
