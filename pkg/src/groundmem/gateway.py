"""Uniform interface to the three model capabilities the pipeline needs:
chat-style generation, iterative image editing, and embedding.

Live mode speaks HTTP JSON (chat-completion style for chat, base64 PNG
payloads for images, vector responses for embeddings). Mock mode delegates
to the deterministic rule suite in `mockbackend`; every mock output is a
pure function of (seed, role tag, messages).
"""

from __future__ import annotations

import base64
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import requests

from .core import Canvas, Embedding, GroundMemError
from .canvas_io import canvas_from_png_bytes, canvas_to_png_bytes


class BackendUnreachable(GroundMemError):
    pass


class BackendTimeout(GroundMemError):
    pass


class NonRetryableStatus(GroundMemError):
    pass


class EmptyInput(GroundMemError):
    pass


class DecodeError(GroundMemError):
    pass


class RoleTag(Enum):
    OBSERVER = "Observer"
    CONSTRUCTOR = "Constructor"
    SUMMARIZER = "Summarizer"
    FACT_DECOMPOSER = "FactDecomposer"
    CAPTIONER = "Captioner"
    FACT_CHECKER = "FactChecker"
    LINKER = "Linker"
    PLANNER = "Planner"
    REFINER = "Refiner"
    PROCESSOR = "Processor"
    ANSWERER = "Answerer"
    JUDGE = "Judge"
    ANNOTATOR = "Annotator"


@dataclass(frozen=True)
class ChatRequest:
    role_tag: RoleTag
    messages: tuple[tuple[str, str], ...]  # (role, text)
    attachments: tuple[Canvas, ...] = ()

    def __post_init__(self):
        if not self.messages:
            raise ValueError("chat request needs at least one message")

    def text(self) -> str:
        """All message text concatenated, for rule-based mock dispatch."""
        return "\n".join(text for _, text in self.messages)


@dataclass(frozen=True)
class BackendConfig:
    mode: str = "mock"  # live | mock
    chat_endpoint: str = ""
    image_endpoint: str = ""
    embed_endpoint: str = ""
    seed: int = 0
    timeout_ms: int = 30_000
    max_retries: int = 2
    max_in_flight: int = 8

    def __post_init__(self):
        if self.mode not in ("live", "mock"):
            raise ValueError(f"unknown backend mode: {self.mode!r}")
        if self.mode == "live" and not (
            self.chat_endpoint and self.image_endpoint and self.embed_endpoint
        ):
            raise ValueError("live mode requires chat, image, and embed endpoints")

    @classmethod
    def from_env(cls, **overrides) -> "BackendConfig":
        env = os.environ
        values = dict(
            mode=env.get("GROUNDMEM_MODE", "mock"),
            chat_endpoint=env.get("GROUNDMEM_CHAT_URL", ""),
            image_endpoint=env.get("GROUNDMEM_IMAGE_URL", ""),
            embed_endpoint=env.get("GROUNDMEM_EMBED_URL", ""),
            seed=int(env.get("GROUNDMEM_SEED", "0")),
        )
        values.update(overrides)
        return cls(**values)


class ModelGateway:
    """Reentrant facade over the chat/image/embed backends.

    Mock state is read-only after construction, so one gateway may be shared
    across threads.
    """

    def __init__(self, config: BackendConfig):
        self.config = config
        if config.mode == "mock":
            from .mockbackend import MockSuite

            self._mock: Optional["MockSuite"] = MockSuite(seed=config.seed)
        else:
            self._mock = None

    # -- chat ---------------------------------------------------------------

    def chat(self, request: ChatRequest) -> str:
        if self._mock is not None:
            return self._mock.chat(request)
        return self._live_chat(request)

    def _live_chat(self, request: ChatRequest) -> str:
        content_blocks = [
            {"role": role, "content": text} for role, text in request.messages
        ]
        if request.attachments:
            images = [
                {
                    "type": "image_url",
                    "image_url": {
                        "url": "data:image/png;base64,"
                        + base64.b64encode(canvas_to_png_bytes(c)).decode()
                    },
                }
                for c in request.attachments
            ]
            last = content_blocks[-1]
            last["content"] = [{"type": "text", "text": last["content"]}] + images
        payload = {"messages": content_blocks, "metadata": {"role_tag": request.role_tag.value}}
        data = self._post(self.config.chat_endpoint, payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise DecodeError("chat response missing choices[0].message.content")

    # -- image --------------------------------------------------------------

    def edit_image(self, base: Optional[Canvas], prompt: str, sample_seed: int = 0) -> Canvas:
        if not prompt.strip():
            raise ValueError("image prompt must be non-empty")
        if self._mock is not None:
            return self._mock.edit_image(base, prompt, sample_seed=sample_seed)
        payload = {"prompt": prompt, "seed": sample_seed}
        if base is not None:
            payload["image"] = base64.b64encode(canvas_to_png_bytes(base)).decode()
        data = self._post(self.config.image_endpoint, payload)
        try:
            raw = base64.b64decode(data["image"])
            return canvas_from_png_bytes(raw)
        except Exception as exc:
            raise DecodeError(f"cannot decode image response: {exc}")

    # -- embeddings ---------------------------------------------------------

    def embed_text(self, text: str) -> Embedding:
        if not text.strip():
            raise EmptyInput("cannot embed empty text")
        if self._mock is not None:
            return self._mock.embed_text(text)
        data = self._post(self.config.embed_endpoint, {"input": text})
        return self._decode_embedding(data)

    def embed_image(self, canvas: Canvas) -> Embedding:
        if self._mock is not None:
            return self._mock.embed_image(canvas)
        payload = {"image": base64.b64encode(canvas_to_png_bytes(canvas)).decode()}
        data = self._post(self.config.embed_endpoint, payload)
        return self._decode_embedding(data)

    @staticmethod
    def _decode_embedding(data) -> Embedding:
        try:
            return Embedding(tuple(float(v) for v in data["embedding"]))
        except (KeyError, TypeError, ValueError):
            raise DecodeError("embedding response missing numeric 'embedding' field")

    # -- transport ----------------------------------------------------------

    def _post(self, url: str, payload: dict) -> dict:
        last_error: GroundMemError = BackendUnreachable(f"no attempt made for {url}")
        for _ in range(self.config.max_retries + 1):
            try:
                resp = requests.post(
                    url, json=payload, timeout=self.config.timeout_ms / 1000.0
                )
            except requests.Timeout:
                last_error = BackendTimeout(f"timeout talking to {url}")
                continue
            except requests.RequestException as exc:
                last_error = BackendUnreachable(f"cannot reach {url}: {exc}")
                continue
            if 200 <= resp.status_code < 300:
                try:
                    return resp.json()
                except ValueError:
                    raise DecodeError(f"non-JSON response from {url}")
            if 500 <= resp.status_code < 600:
                last_error = BackendUnreachable(f"{url} returned {resp.status_code}")
                continue
            raise NonRetryableStatus(f"{url} returned {resp.status_code}")
        raise last_error
