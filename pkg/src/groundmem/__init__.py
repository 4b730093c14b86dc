"""groundmem: versioned multimodal memory for situated dialogue.

Phase 1 externalizes dialogue state into per-speaker artifact sequences
(visual canvases and/or textual summaries) with a cross-frame relation graph;
Phase 2 answers grounding questions over that memory with a planned
retrieval-augmented reasoner. A deterministic mock model suite makes the
whole pipeline testable offline.
"""

from .core import (
    Annotation,
    ArtifactVersion,
    AtomicFact,
    Canvas,
    CanvasObject,
    EditAction,
    Embedding,
    FactVerdict,
    FaithfulnessReport,
    FrameId,
    GroundMemError,
    JudgeOutcome,
    JudgeVerdict,
    ObserverDecision,
    Outline,
    Plan,
    PlanCommand,
    PlanStep,
    QAItem,
    RelationType,
    SpeakerId,
    Triplet,
    Utterance,
    parse_frame_id,
    validate_plan,
)
from .gateway import BackendConfig, ChatRequest, ModelGateway, RoleTag
from .linker import TripletGraph
from .memory import MemoryBank, ScoredHit
from .pipeline import Dialogue, PhaseOneBuilder, SeedFrame
from .reasoner import ReasonerConfig, answer_question

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "ArtifactVersion",
    "AtomicFact",
    "BackendConfig",
    "Canvas",
    "CanvasObject",
    "ChatRequest",
    "Dialogue",
    "EditAction",
    "Embedding",
    "FactVerdict",
    "FaithfulnessReport",
    "FrameId",
    "GroundMemError",
    "JudgeOutcome",
    "JudgeVerdict",
    "MemoryBank",
    "ModelGateway",
    "ObserverDecision",
    "Outline",
    "PhaseOneBuilder",
    "Plan",
    "PlanCommand",
    "PlanStep",
    "QAItem",
    "ReasonerConfig",
    "RelationType",
    "RoleTag",
    "ScoredHit",
    "SeedFrame",
    "SpeakerId",
    "Triplet",
    "TripletGraph",
    "Utterance",
    "answer_question",
    "parse_frame_id",
    "validate_plan",
    "__version__",
]
