"""Chat-completion access: a live client for OpenAI-compatible endpoints,
a recording wrapper, and a deterministic replay gateway for tests.

Transcripts are JSONL, one (digest, request, response) record per line.
Digests are content hashes of the request messages with per-line trailing
whitespace stripped, so cosmetic template drift does not orphan a transcript.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Union

import requests

from .models import UsageStats

log = logging.getLogger(__name__)

__all__ = [
    "GatewayError",
    "AuthError",
    "RateLimited",
    "MalformedResponse",
    "CompletionTimeout",
    "UnmatchedRequest",
    "ModelConfig",
    "Message",
    "ChatRequest",
    "ChatResponse",
    "TranscriptEntry",
    "Transcript",
    "Gateway",
    "LiveGateway",
    "RecordingGateway",
    "ReplayGateway",
    "request_digest",
    "complete",
    "record",
    "replay",
    "user_request",
]


# =============================================================================
# Errors
# =============================================================================

class GatewayError(Exception):
    """Base for all gateway failures."""


class AuthError(GatewayError):
    """Missing or rejected API credentials."""


class RateLimited(GatewayError):
    """HTTP 429 persisted past the retry budget."""


class MalformedResponse(GatewayError):
    """Endpoint payload is missing the completion content."""


class CompletionTimeout(GatewayError):
    """The HTTP request timed out."""


class UnmatchedRequest(GatewayError):
    """Replay saw a request whose digest has no unconsumed transcript entry.

    This signals drift between the current prompts and the recorded run.
    """


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class ModelConfig:
    """Endpoint coordinates and sampling knobs.

    api_key_ref names an environment variable; the key itself never appears
    in configs, CLI args, or logs.
    """

    model_name: str
    api_base_url: str
    api_key_ref: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_output_tokens: Optional[int] = None
    request_timeout: float = 120.0
    max_retries: int = 3
    retry_base_delay: float = 0.5

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role: {self.role!r}")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if self.messages[-1].role != "user":
            raise ValueError("the last message must come from the user")

    @property
    def digest(self) -> str:
        return request_digest(self.messages)

    def to_dict(self) -> dict:
        return {"messages": [m.to_dict() for m in self.messages]}

    @classmethod
    def from_dict(cls, data: dict) -> "ChatRequest":
        return cls(
            messages=tuple(Message(m["role"], m["content"]) for m in data["messages"])
        )


def user_request(content: str) -> ChatRequest:
    """Single-turn user message, the shape every agent prompt uses."""
    return ChatRequest(messages=(Message("user", content),))


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: UsageStats
    finish_reason: str = "stop"

    def __post_init__(self) -> None:
        if self.usage.api_calls != 1:
            raise ValueError("a single response always counts exactly one api call")

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "usage": self.usage.to_dict(),
            "finish_reason": self.finish_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChatResponse":
        return cls(
            content=data["content"],
            usage=UsageStats.from_dict(data["usage"]),
            finish_reason=data.get("finish_reason", "stop"),
        )


def request_digest(messages: Iterable[Message]) -> str:
    """Stable hash of role:content pairs, trailing whitespace stripped per line."""
    parts = []
    for m in messages:
        normalized = "\n".join(line.rstrip() for line in m.content.splitlines())
        parts.append(f"{m.role}:{normalized}")
    joined = "\n\x00\n".join(parts)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TranscriptEntry:
    request_digest: str
    request: ChatRequest
    response: ChatResponse

    def to_dict(self) -> dict:
        return {
            "request_digest": self.request_digest,
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranscriptEntry":
        return cls(
            request_digest=data["request_digest"],
            request=ChatRequest.from_dict(data["request"]),
            response=ChatResponse.from_dict(data["response"]),
        )


@dataclass(frozen=True)
class Transcript:
    entries: tuple[TranscriptEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    @staticmethod
    def pair(request: ChatRequest, response: ChatResponse) -> TranscriptEntry:
        return TranscriptEntry(request.digest, request, response)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry.to_dict()) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Transcript":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(TranscriptEntry.from_dict(json.loads(line)))
        return cls(entries=tuple(entries))


# =============================================================================
# Gateways
# =============================================================================

class Gateway(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


_RETRYABLE_STATUS = frozenset({429}) | frozenset(range(500, 600))


class LiveGateway:
    """Synchronous client for any OpenAI-compatible /chat/completions endpoint.

    Transient failures (connection errors, HTTP 429/5xx) are retried with
    exponential backoff up to cfg.max_retries extra attempts.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self._session = requests.Session()
        self._lock = threading.Lock()

    def _api_key(self) -> str:
        key = os.environ.get(self.cfg.api_key_ref, "")
        if not key:
            raise AuthError(
                f"no API key: environment variable {self.cfg.api_key_ref} is unset or empty"
            )
        return key

    def _endpoint(self) -> str:
        return self.cfg.api_base_url.rstrip("/") + "/chat/completions"

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = self._api_key()
        payload: dict = {
            "model": self.cfg.model_name,
            "messages": [m.to_dict() for m in request.messages],
            "temperature": self.cfg.temperature,
        }
        if self.cfg.max_output_tokens is not None:
            payload["max_tokens"] = self.cfg.max_output_tokens
        headers = {"Authorization": f"Bearer {key}"}

        attempts = self.cfg.max_retries + 1
        last_status: Optional[int] = None
        for attempt in range(attempts):
            if attempt:
                delay = self.cfg.retry_base_delay * (2 ** (attempt - 1))
                time.sleep(delay)
            try:
                with self._lock:
                    http = self._session.post(
                        self._endpoint(),
                        json=payload,
                        headers=headers,
                        timeout=self.cfg.request_timeout,
                    )
            except requests.Timeout as exc:
                raise CompletionTimeout(str(exc)) from exc
            except requests.ConnectionError as exc:
                last_status = None
                log.warning("connection error (attempt %d/%d): %s", attempt + 1, attempts, exc)
                continue

            if http.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {http.status_code})")
            if http.status_code in _RETRYABLE_STATUS:
                last_status = http.status_code
                log.warning("HTTP %d (attempt %d/%d)", http.status_code, attempt + 1, attempts)
                continue
            if http.status_code != 200:
                raise GatewayError(f"unexpected HTTP {http.status_code}: {http.text[:200]}")
            return self._parse(http, request)

        if last_status == 429:
            raise RateLimited(f"still rate-limited after {attempts} attempts")
        raise GatewayError(
            f"transient failures persisted through {attempts} attempts"
            + (f" (last HTTP {last_status})" if last_status else "")
        )

    def _parse(self, http: requests.Response, request: ChatRequest) -> ChatResponse:
        try:
            body = http.json()
        except ValueError as exc:
            raise MalformedResponse(f"endpoint returned non-JSON body: {exc}") from exc
        try:
            choice = body["choices"][0]
            content = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"payload missing completion content: {exc}") from exc
        if content is None:
            raise MalformedResponse("completion content is null")
        finish = choice.get("finish_reason") or "stop"

        reported = body.get("usage") or {}
        if "prompt_tokens" in reported and "completion_tokens" in reported:
            usage = UsageStats(
                api_calls=1,
                prompt_tokens=int(reported["prompt_tokens"]),
                completion_tokens=int(reported["completion_tokens"]),
            )
        else:
            # Endpoint gave no usage; estimate from character counts and flag it.
            prompt_text = "".join(m.content for m in request.messages)
            usage = UsageStats(
                api_calls=1,
                prompt_tokens=UsageStats.estimate_tokens(prompt_text),
                completion_tokens=UsageStats.estimate_tokens(content),
                estimated=True,
            )
        return ChatResponse(content=content, usage=usage, finish_reason=finish)


class RecordingGateway:
    """Wraps a gateway and appends every exchange to a JSONL transcript file."""

    def __init__(self, inner: Gateway, sink: Union[str, Path]):
        self.inner = inner
        self.sink = Path(sink)
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        entry = TranscriptEntry(request.digest, request, response)
        with self._lock:
            with open(self.sink, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_dict()) + "\n")
                fh.flush()
        return response


class ReplayGateway:
    """Serves recorded responses by digest; order-tolerant within a digest
    (first unconsumed entry wins). Matching is serialized internally."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self._lock = threading.Lock()
        self._consumed = [False] * len(transcript.entries)

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request.digest
        with self._lock:
            for i, entry in enumerate(self.transcript.entries):
                if not self._consumed[i] and entry.request_digest == digest:
                    self._consumed[i] = True
                    return entry.response
        preview = request.messages[-1].content[:120].replace("\n", " ")
        raise UnmatchedRequest(
            f"no unconsumed transcript entry for digest {digest[:12]}... "
            f"(request starts: {preview!r})"
        )

    @property
    def fully_consumed(self) -> bool:
        return all(self._consumed)


# =============================================================================
# Operation-style entry points
# =============================================================================

def complete(req: ChatRequest, cfg: ModelConfig) -> ChatResponse:
    return LiveGateway(cfg).complete(req)


def record(inner_gateway: Gateway, sink: Union[str, Path]) -> RecordingGateway:
    return RecordingGateway(inner_gateway, sink)


def replay(transcript: Transcript) -> ReplayGateway:
    return ReplayGateway(transcript)
