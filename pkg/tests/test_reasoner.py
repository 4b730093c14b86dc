"""Planned retrieval-augmented reasoning over the memory bank."""

import pytest

from groundmem.core import (
    Plan,
    PlanCommand,
    PlanStep,
    SpeakerId,
)
from groundmem.memory import MemoryBank
from groundmem.linker import TripletGraph
from groundmem.reasoner import (
    PlanInvalid,
    ReasonerConfig,
    StepFailed,
    answer_question,
    execute_plan,
    make_plan,
    refine_instruction,
    render_evidence,
)

CONFIG = ReasonerConfig(condition="visual")


def _plan(*steps) -> Plan:
    return Plan(tuple(steps))


class TestMakePlan:
    def test_mock_plan_shape(self, gateway):
        plan = make_plan("What color is your staircase?", SpeakerId.A, gateway)
        commands = [s.command for s in plan.steps]
        assert commands == [PlanCommand.POV, PlanCommand.RAG, PlanCommand.FINAL_ANSWER]
        assert plan.steps[0].instruction == "B"  # "your" points at the other speaker
        assert plan.steps[1].retrieval_count == 5
        assert validate_ok(plan)

    def test_pov_deixis(self, gateway):
        mine = make_plan("What color was my rug?", SpeakerId.B, gateway)
        neutral = make_plan("What color was the rug?", SpeakerId.B, gateway)
        assert mine.steps[0].instruction == "B"
        assert neutral.steps[0].instruction == "BOTH"

    def test_empty_question(self, gateway):
        with pytest.raises(ValueError):
            make_plan("  ", SpeakerId.A, gateway)

    def test_invalid_planner_output_raises_after_retry(self):
        class BrokenPlanner:
            def chat(self, request):
                return "<answer><item>POV A</item></answer>"  # no FINAL_ANSWER

        with pytest.raises(PlanInvalid):
            make_plan("question?", SpeakerId.A, BrokenPlanner())


def validate_ok(plan) -> bool:
    from groundmem.core import validate_plan

    return validate_plan(plan) == []


class TestRefine:
    def test_preserves_command_and_count(self, gateway):
        step = PlanStep(PlanCommand.RAG, "the color of the rug in the bathroom", retrieval_count=5)
        refined = refine_instruction(step, "q", gateway)
        assert refined.command is PlanCommand.RAG
        assert refined.retrieval_count == 5
        assert refined.instruction  # non-empty rewrite

    def test_best_effort_on_failure(self):
        from groundmem.core import GroundMemError

        class FailingRefiner:
            def chat(self, request):
                raise GroundMemError("backend down")

        step = PlanStep(PlanCommand.PROCESS, "sort by turn")
        assert refine_instruction(step, "q", FailingRefiner()) == step


class TestExecutePlan:
    def test_invalid_plan_rejected(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        bad = _plan(PlanStep(PlanCommand.POV, "A"))
        with pytest.raises(PlanInvalid):
            execute_plan(bad, build.bank, build.graph, "q", gateway, CONFIG)

    def test_retrieval_gated_to_rag_steps(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        plan = _plan(
            PlanStep(PlanCommand.POV, "B"),
            PlanStep(PlanCommand.RAG, "drum set", retrieval_count=3),
            PlanStep(PlanCommand.RAG, "kitchen", retrieval_count=3),
            PlanStep(PlanCommand.PROCESS, "drum"),
            PlanStep(PlanCommand.FINAL_ANSWER, "Did B have a drum set?"),
        )
        trace = execute_plan(plan, build.bank, build.graph, "Did B have a drum set?", gateway, CONFIG)
        rag_steps = [s for s in trace.steps if s.command == "RAG"]
        assert trace.retrieve_calls == len(rag_steps) == 2
        assert trace.steps[-1].command == "FINAL_ANSWER"
        assert sum(1 for s in trace.steps if s.command == "FINAL_ANSWER") == 1

    def test_pov_confinement(self, gateway, sample_builds):
        build = sample_builds["bathroom_revisit"]
        plan = _plan(
            PlanStep(PlanCommand.POV, "B"),
            PlanStep(PlanCommand.RAG, "tub", retrieval_count=5),
            PlanStep(PlanCommand.FINAL_ANSWER, "What color was the tub?"),
        )
        trace = execute_plan(plan, build.bank, build.graph, "What color was the tub?", gateway, CONFIG)
        assert trace.evidence_frames and all(f.startswith("B_") for f in trace.evidence_frames)
        assert trace.answer == "red"

    def test_bad_pov_instruction(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        plan = _plan(
            PlanStep(PlanCommand.POV, "EVERYONE"),
            PlanStep(PlanCommand.FINAL_ANSWER, "q"),
        )
        with pytest.raises(StepFailed) as err:
            execute_plan(plan, build.bank, build.graph, "q", gateway, CONFIG)
        assert err.value.step_index == 0

    def test_empty_bank_abstains(self, gateway):
        plan = _plan(
            PlanStep(PlanCommand.RAG, "anything", retrieval_count=3),
            PlanStep(PlanCommand.FINAL_ANSWER, "What color was the rug?"),
        )
        trace = execute_plan(plan, MemoryBank(), TripletGraph(), "What color was the rug?", gateway, CONFIG)
        assert trace.answer == "not specified"
        assert any("EmptyBank" in n for n in trace.notes)

    def test_restate_patch_replaces_bare_yes(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        question = "Do you remember the drum set?"
        answer, _ = answer_question(
            question, SpeakerId.A, build.bank, build.graph, gateway, CONFIG
        )
        assert answer == "drum set"

    def test_restate_patch_disabled(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        question = "Do you remember the drum set?"
        config = ReasonerConfig(condition="visual", restate_patch=False)
        answer, _ = answer_question(
            question, SpeakerId.A, build.bank, build.graph, gateway, config
        )
        assert answer == "yes"

    def test_color_path_wins_over_restate(self, gateway, sample_builds):
        build = sample_builds["basement_tour"]
        question = "Can you remind me of the color of the stair case you have?"
        answer, _ = answer_question(
            question, SpeakerId.B, build.bank, build.graph, gateway, CONFIG
        )
        assert answer == "white"


class TestRenderEvidence:
    def test_layout(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        hits = build.bank.retrieve("home office", 2, "B", "visual", 0.7, gateway)
        pack = build.bank.assemble_evidence(hits, build.graph)
        text = render_evidence(pack, build.bank)
        lines = text.splitlines()
        assert lines[0].startswith("[frame B_")
        assert any(line.startswith("object: ") for line in lines)
        assert any(line.startswith("triplet: B_3 (home office) is_north_of B_2" ) for line in lines)


class TestAnswerQuestion:
    @pytest.mark.parametrize(
        "question,asker,want",
        [
            ("Did you have a drum set in your home office?", SpeakerId.A, "yes"),
            ("What was the color of the rug in the bathroom?", SpeakerId.A, "yellow"),
            ("What was the color of the tub?", SpeakerId.A, "red"),
        ],
    )
    def test_sample_questions(self, gateway, sample_builds, question, asker, want):
        build = sample_builds[
            "office_tour" if "drum" in question else "bathroom_revisit"
        ]
        answer, trace = answer_question(question, asker, build.bank, build.graph, gateway, CONFIG)
        assert answer == want
        assert trace.steps[-1].command == "FINAL_ANSWER"

    def test_abstain_when_unsupported(self, gateway, sample_builds):
        build = sample_builds["office_tour"]
        answer, _ = answer_question(
            "What was the color of the piano?", SpeakerId.A, build.bank, build.graph, gateway, CONFIG
        )
        assert answer == "not specified"
