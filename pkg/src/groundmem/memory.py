"""The memory bank: append-only artifact versions per frame, cached
embeddings, the hybrid retrieval scorer, and directory persistence."""

from __future__ import annotations

import json
import logging
import os
import shutil
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .canvas_io import (
    canvas_from_png_bytes,
    canvas_to_png_bytes,
    registry_from_json,
    registry_to_json,
)
from .core import ArtifactVersion, Embedding, FrameId, GroundMemError, Triplet, parse_frame_id
from .gateway import ModelGateway
from .linker import TripletGraph

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.7


class UnallocatedFrame(GroundMemError):
    """Version inserted for a frame never allocated in this bank."""


class MissingCanvas(GroundMemError):
    """Visual scoring requested for a version without a canvas."""


class EmptyBank(GroundMemError):
    """No frames pass the retrieval filter."""


def cosine(a: Optional[Embedding], b: Optional[Embedding]) -> float:
    """Cosine similarity; zero vectors and absent embeddings score 0."""
    if a is None or b is None:
        return 0.0
    va = np.asarray(a.values, dtype=np.float64)
    vb = np.asarray(b.values, dtype=np.float64)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


@dataclass(frozen=True)
class ScoredHit:
    frame_id: FrameId
    score: float
    channel: str  # visual | textual
    version: ArtifactVersion

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("hit score must be finite")


@dataclass(frozen=True)
class EvidenceItem:
    hit: ScoredHit
    version: ArtifactVersion
    metadata: str
    triplets: tuple[Triplet, ...]


@dataclass(frozen=True)
class EvidencePack:
    items: tuple[EvidenceItem, ...]


@dataclass
class MemoryBank:
    """Per-dialogue store. Single writer during Phase 1; read-only afterwards."""

    versions: dict[FrameId, list[ArtifactVersion]] = field(default_factory=dict)
    allocated: list[FrameId] = field(default_factory=list)
    _embeddings: dict[str, Optional[Embedding]] = field(default_factory=dict)

    # -- building -------------------------------------------------------------

    def allocate(self, frame: FrameId) -> None:
        base = frame.base()
        if base not in self.versions:
            self.versions[base] = []
            self.allocated.append(base)

    def insert(self, version: ArtifactVersion, gateway: ModelGateway) -> None:
        base = version.frame_id.base()
        if base not in self.versions:
            raise UnallocatedFrame(f"frame {base} was never allocated")
        self.versions[base].append(version)
        key = version.frame_id.render()
        if version.canvas is not None:
            self._embeddings[key + "|visual"] = gateway.embed_image(version.canvas)
        self._embeddings[key + "|meta"] = (
            gateway.embed_text(version.metadata) if version.metadata.strip() else None
        )
        if version.summary is not None and version.summary.strip():
            self._embeddings[key + "|summary"] = gateway.embed_text(version.summary)

    # -- access ---------------------------------------------------------------

    def latest(self, frame: FrameId) -> ArtifactVersion:
        history = self.versions.get(frame.base())
        if not history:
            raise UnallocatedFrame(f"no versions stored for {frame.base()}")
        return history[-1]

    def frames(self) -> list[FrameId]:
        return [f for f in self.allocated if self.versions[f]]

    def embedding(self, version: ArtifactVersion, kind: str) -> Optional[Embedding]:
        return self._embeddings.get(version.frame_id.render() + "|" + kind)

    # -- scoring --------------------------------------------------------------

    def score_visual(
        self, version: ArtifactVersion, query: str, lam: float, gateway: ModelGateway
    ) -> float:
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if version.canvas is None:
            raise MissingCanvas(f"{version.frame_id} has no canvas")
        q = gateway.embed_text(query)
        visual = cosine(self.embedding(version, "visual"), q)
        meta = cosine(self.embedding(version, "meta"), q)
        return lam * visual + (1.0 - lam) * meta

    def score_textual(
        self, version: ArtifactVersion, query: str, gateway: ModelGateway
    ) -> float:
        q = gateway.embed_text(query)
        return cosine(self.embedding(version, "summary"), q)

    def retrieve(
        self,
        query: str,
        n: int,
        pov: str,
        condition: str,
        lam: float,
        gateway: ModelGateway,
    ) -> list[ScoredHit]:
        """Top-N latest versions under the pov filter, scored on the channels
        the condition enables; deterministic tie-break by frame id."""
        if n < 1:
            raise ValueError("retrieval count must be >= 1")
        if pov not in ("A", "B", "BOTH"):
            raise ValueError(f"unknown pov: {pov!r}")
        if condition not in ("visual", "textual", "both"):
            raise ValueError(f"unknown condition: {condition!r}")
        hits: list[ScoredHit] = []
        for frame in self.frames():
            if pov != "BOTH" and frame.speaker.value != pov:
                continue
            version = self.latest(frame)
            channels: list[tuple[float, str]] = []
            if condition in ("visual", "both") and version.canvas is not None:
                channels.append(
                    (self.score_visual(version, query, lam, gateway), "visual")
                )
            if condition in ("textual", "both") and version.summary is not None:
                channels.append((self.score_textual(version, query, gateway), "textual"))
            if not channels:
                continue
            score, channel = max(channels, key=lambda c: c[0])
            hits.append(ScoredHit(frame_id=frame, score=score, channel=channel, version=version))
        if not hits:
            raise EmptyBank(f"no frames pass pov={pov} under condition={condition}")
        hits.sort(key=lambda h: (-h.score, h.frame_id.sort_key))
        return hits[:n]

    def assemble_evidence(
        self, hits: Sequence[ScoredHit], graph: TripletGraph
    ) -> EvidencePack:
        items = tuple(
            EvidenceItem(
                hit=hit,
                version=hit.version,
                metadata=hit.version.metadata,
                triplets=tuple(graph.triplets_for([hit.frame_id])),
            )
            for hit in hits
        )
        return EvidencePack(items=items)

    # -- persistence ------------------------------------------------------------

    def save(self, path: str, graph: TripletGraph) -> None:
        """Serialize atomically to a directory (write-then-rename)."""
        tmp = path.rstrip("/") + ".tmp"
        if os.path.exists(tmp):
            shutil.rmtree(tmp)
        frames_dir = os.path.join(tmp, "frames")
        os.makedirs(frames_dir)
        manifest: dict = {"frames": [], "embeddings": []}
        for frame in self.allocated:
            record = {"frame": frame.render(), "versions": []}
            for version in self.versions[frame]:
                key = version.frame_id.render()
                entry = {
                    "id": key,
                    "prompt": version.prompt,
                    "created_at_turn": version.created_at_turn,
                    "has_canvas": version.canvas is not None,
                    "has_summary": version.summary is not None,
                }
                record["versions"].append(entry)
                if version.canvas is not None:
                    with open(os.path.join(frames_dir, key + ".png"), "wb") as fh:
                        fh.write(canvas_to_png_bytes(version.canvas))
                    with open(
                        os.path.join(frames_dir, key + ".objects.json"), "w"
                    ) as fh:
                        fh.write(registry_to_json(version.canvas.object_registry))
                if version.summary is not None:
                    with open(
                        os.path.join(frames_dir, key + ".summary.txt"), "w"
                    ) as fh:
                        fh.write(version.summary)
                with open(os.path.join(frames_dir, key + ".meta.txt"), "w") as fh:
                    fh.write(version.metadata)
            manifest["frames"].append(record)
        buffers = []
        for key in sorted(self._embeddings):
            emb = self._embeddings[key]
            manifest["embeddings"].append(
                {"key": key, "dim": emb.dimension if emb else 0}
            )
            if emb:
                buffers.append(np.asarray(emb.values, dtype=np.float64))
        with open(os.path.join(tmp, "embeddings.bin"), "wb") as fh:
            if buffers:
                np.concatenate(buffers).tofile(fh)
        with open(os.path.join(tmp, "links.jsonl"), "w") as fh:
            for t in graph.all_triplets():
                fh.write(
                    json.dumps(
                        {
                            "subject": t.subject.render(),
                            "predicate": t.predicate,
                            "object": t.object.render(),
                        }
                    )
                    + "\n"
                )
        with open(os.path.join(tmp, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        if os.path.exists(path):
            shutil.rmtree(path)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> tuple["MemoryBank", TripletGraph]:
        with open(os.path.join(path, "manifest.json")) as fh:
            manifest = json.load(fh)
        frames_dir = os.path.join(path, "frames")
        bank = cls()
        for record in manifest["frames"]:
            base = parse_frame_id(record["frame"])
            bank.allocate(base)
            for entry in record["versions"]:
                key = entry["id"]
                canvas = None
                if entry["has_canvas"]:
                    with open(os.path.join(frames_dir, key + ".png"), "rb") as fh:
                        png = fh.read()
                    with open(os.path.join(frames_dir, key + ".objects.json")) as fh:
                        registry = registry_from_json(fh.read())
                    canvas = canvas_from_png_bytes(png, registry)
                summary = None
                if entry["has_summary"]:
                    with open(os.path.join(frames_dir, key + ".summary.txt")) as fh:
                        summary = fh.read()
                with open(os.path.join(frames_dir, key + ".meta.txt")) as fh:
                    metadata = fh.read()
                version = ArtifactVersion(
                    frame_id=parse_frame_id(key),
                    canvas=canvas,
                    summary=summary,
                    prompt=entry["prompt"],
                    metadata=metadata,
                    created_at_turn=entry["created_at_turn"],
                )
                bank.versions[base].append(version)
        values = np.fromfile(os.path.join(path, "embeddings.bin"), dtype=np.float64)
        offset = 0
        for entry in manifest["embeddings"]:
            dim = entry["dim"]
            if dim == 0:
                bank._embeddings[entry["key"]] = None
                continue
            bank._embeddings[entry["key"]] = Embedding(
                tuple(float(v) for v in values[offset : offset + dim])
            )
            offset += dim
        graph = TripletGraph()
        for frame in bank.frames():
            graph.register_frame(frame)
        with open(os.path.join(path, "links.jsonl")) as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                graph.insert_triplet(
                    Triplet(
                        parse_frame_id(obj["subject"]),
                        obj["predicate"],
                        parse_frame_id(obj["object"]),
                    )
                )
        return bank, graph
