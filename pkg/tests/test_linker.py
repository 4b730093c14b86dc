"""Relation graph: predicate normalization, idempotent insertion, queries,
and model-driven link extraction."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundmem.core import FrameId, SpeakerId, Triplet
from groundmem.linker import (
    CANONICAL_PREDICATES,
    PREDICATE_INVERSES,
    TripletGraph,
    UnknownFrame,
    UnknownPredicate,
    extract_links,
    normalize_predicate,
)

A1 = FrameId(SpeakerId.A, 1)
B1 = FrameId(SpeakerId.B, 1)
B2 = FrameId(SpeakerId.B, 2)
B3 = FrameId(SpeakerId.B, 3)


def _graph(*frames) -> TripletGraph:
    graph = TripletGraph()
    for f in frames:
        graph.register_frame(f)
    return graph


class TestNormalizePredicate:
    @pytest.mark.parametrize(
        "raw,want",
        [
            ("north_of", "is_north_of"),
            ("is_north_of", "is_north_of"),
            ("Next To", "is_next_to"),
            ("  SAME_AS ", "is_same_as"),
            ("revisit of", "is_revisit_of"),
        ],
    )
    def test_aliases(self, raw, want):
        assert normalize_predicate(raw) == want

    def test_unknown(self):
        with pytest.raises(UnknownPredicate):
            normalize_predicate("is_above")

    def test_inverses_are_canonical_and_involutive(self):
        for pred, inv in PREDICATE_INVERSES.items():
            assert pred in CANONICAL_PREDICATES and inv in CANONICAL_PREDICATES
            assert PREDICATE_INVERSES[inv] == pred


class TestTripletGraph:
    def test_insert_idempotent(self):
        graph = _graph(B2, B3)
        t = Triplet(B3, "is_north_of", B2)
        graph.insert_triplet(t)
        graph.insert_triplet(t)
        assert len(graph) == 1
        assert graph.all_triplets() == [t]

    def test_referential_integrity(self):
        graph = _graph(B2)
        with pytest.raises(UnknownFrame):
            graph.insert_triplet(Triplet(B3, "is_north_of", B2))

    def test_neighbors_inverse_aware(self):
        graph = _graph(B2, B3)
        graph.insert_triplet(Triplet(B3, "is_north_of", B2))
        # Asking for frames south of B_3 must surface the stored inverse.
        assert graph.neighbors(B3, "is_south_of") == [Triplet(B3, "is_north_of", B2)]
        assert graph.neighbors(B2, "is_north_of") == [Triplet(B3, "is_north_of", B2)]
        assert graph.neighbors(B2, "is_east_of") == []

    def test_neighbors_unknown_frame(self):
        with pytest.raises(UnknownFrame):
            _graph(B2).neighbors(A1)

    def test_sequence_versions_share_base_identity(self):
        graph = _graph(B2, B3)
        graph.insert_triplet(Triplet(B3, "is_north_of", B2))
        assert graph.neighbors(B3.with_sequence(4)) == [Triplet(B3, "is_north_of", B2)]

    def test_triplets_for_dedup_and_order(self):
        graph = _graph(A1, B1, B2, B3)
        ts = [
            Triplet(B3, "is_north_of", B2),
            Triplet(B1, "is_next_to", A1),
            Triplet(B3, "is_east_of", B1),
        ]
        for t in ts:
            graph.insert_triplet(t)
        got = graph.triplets_for([B3, B1])
        assert got == sorted(
            ts, key=lambda t: (t.subject.sort_key, t.predicate, t.object.sort_key)
        )
        assert len(got) == len(set(got))

    @given(st.permutations([0, 1, 2]))
    def test_triplets_for_insertion_order_independent(self, order):
        ts = [
            Triplet(B3, "is_north_of", B2),
            Triplet(B2, "is_next_to", A1),
            Triplet(B3, "is_east_of", A1),
        ]
        graph = _graph(A1, B2, B3)
        for i in order:
            graph.insert_triplet(ts[i])
        assert graph.triplets_for([A1, B2, B3]) == sorted(
            ts, key=lambda t: (t.subject.sort_key, t.predicate, t.object.sort_key)
        )


class TestExtractLinks:
    META = {B2: "kitchen", B3: "home office"}

    def test_direction_with_source_room(self, gateway):
        triplets = extract_links(
            "I moved north from a kitchen to get here",
            ["context"],
            {"prev": B2, "curr": B3, "next": None},
            self.META,
            gateway,
        )
        assert triplets == [Triplet(B3, "is_north_of", B2)]

    def test_direction_without_source_falls_back_to_prev(self, gateway):
        triplets = extract_links(
            "went east to get here",
            [],
            {"prev": B2, "curr": B3, "next": None},
            self.META,
            gateway,
        )
        assert triplets == [Triplet(B3, "is_east_of", B2)]

    def test_next_to_directionality(self, gateway):
        triplets = extract_links(
            "the kitchen is next to the home office",
            [],
            {"prev": B2, "curr": B3, "next": None},
            self.META,
            gateway,
        )
        assert triplets == [Triplet(B3, "is_next_to", B2)]

    def test_no_relation_yields_empty(self, gateway):
        assert (
            extract_links(
                "nothing relational here",
                [],
                {"prev": B2, "curr": B3, "next": None},
                self.META,
                gateway,
            )
            == []
        )

    def test_requires_current_frame(self, gateway):
        with pytest.raises(ValueError):
            extract_links("north", [], {"prev": B2, "curr": None}, self.META, gateway)

    def test_out_of_context_candidates_dropped(self, gateway):
        # The directive names a room whose frame is not in the context window;
        # the resulting candidate must be dropped, not raised.
        meta = dict(self.META)
        meta[A1] = "garage"
        triplets = extract_links(
            "I walked west from the garage",
            [],
            {"prev": B2, "curr": B3, "next": None},
            meta,
            gateway,
        )
        assert triplets == []
