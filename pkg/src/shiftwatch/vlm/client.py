"""Verifier endpoint adapters.

The call contract is small: ordered multimodal segments plus generation
parameters in, text out, errors split into retriable and fatal. Two
implementations satisfy it: an HTTP chat-completions adapter and a
deterministic scripted client for tests and offline runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .messages import MessageArray, SegmentKind

__all__ = [
    "GenerationParams",
    "VLMRequest",
    "VLMClient",
    "RetriableClientError",
    "FatalClientError",
    "ClientError",
    "call_with_retry",
    "HTTPChatClient",
    "ScriptedVLMClient",
]


class RetriableClientError(Exception):
    """Transient failure; the call may be retried."""


class FatalClientError(Exception):
    """Permanent failure; retrying cannot help."""


class ClientError(Exception):
    """A pass could not be completed within the retry budget."""

    def __init__(self, pass_number: int, detail: str = ""):
        super().__init__(f"pass {pass_number} failed" + (f": {detail}" if detail else ""))
        self.pass_number = pass_number


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class VLMRequest:
    segments: MessageArray
    params: GenerationParams
    pass_number: int
    chunk_key: str


class VLMClient(Protocol):
    def complete(self, request: VLMRequest) -> str: ...

    def prewarm(self) -> bool: ...


def call_with_retry(
    client: VLMClient,
    request: VLMRequest,
    budget: int = 3,
    backoff_base_s: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Issue one pass call with up to ``budget`` attempts.

    Retriable failures back off exponentially (base * 2^attempt); fatal
    failures abort immediately.

    Raises:
        ClientError: budget exhausted or fatal failure, tagged with the pass.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    last: Exception | None = None
    for attempt in range(budget):
        try:
            return client.complete(request)
        except RetriableClientError as exc:
            last = exc
            if attempt + 1 < budget:
                sleep(backoff_base_s * (2**attempt))
        except FatalClientError as exc:
            raise ClientError(request.pass_number, str(exc)) from exc
    raise ClientError(request.pass_number, f"retries exhausted: {last}") from last


class HTTPChatClient:
    """Adapter for an OpenAI-style chat-completions endpoint.

    Media segments are forwarded as URI content parts; the endpoint decides
    how to fetch and encode them.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._model = model
        self._http = httpx.Client(
            base_url=base_url, headers=headers, timeout=timeout_s, transport=transport
        )

    def _payload(self, request: VLMRequest) -> dict:
        system_parts = []
        user_parts = []
        for seg in request.segments:
            if seg.kind is SegmentKind.SYSTEM_TEXT:
                system_parts.append(seg.text)
            elif seg.kind in (SegmentKind.USER_TEXT, SegmentKind.MACHINE_EVIDENCE_TEXT):
                user_parts.append({"type": "text", "text": seg.text})
            elif seg.kind is SegmentKind.VIDEO_REF:
                user_parts.append({"type": "video_url", "video_url": {"url": seg.uri}})
            else:
                user_parts.append({"type": "image_url", "image_url": {"url": seg.uri}})
        messages = []
        if system_parts:
            messages.append({"role": "system", "content": "\n\n".join(system_parts)})
        messages.append({"role": "user", "content": user_parts})
        return {
            "model": self._model,
            "messages": messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        }

    def complete(self, request: VLMRequest) -> str:
        try:
            response = self._http.post("/chat/completions", json=self._payload(request))
        except httpx.TimeoutException as exc:
            raise RetriableClientError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise RetriableClientError(f"transport: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise RetriableClientError(f"status {response.status_code}")
        if response.status_code >= 400:
            raise FatalClientError(f"status {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise FatalClientError(f"malformed completion payload: {exc}") from exc

    def prewarm(self) -> bool:
        try:
            return self._http.get("/models").status_code < 500
        except httpx.HTTPError:
            return False


@dataclass
class ScriptedVLMClient:
    """Deterministic offline client.

    ``responses`` maps a pass number, or a (chunk_key, pass number) pair for
    per-chunk overrides, to the text to return; a list value is served in
    order, with the final entry repeating. ``failures`` maps the same keys
    to a list of exceptions raised (and consumed) before the scripted
    response is served. Every request is recorded for assertions.
    """

    responses: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    requests: list[VLMRequest] = field(default_factory=list)

    def _lookup(self, table: dict, request: VLMRequest):
        key = (request.chunk_key, request.pass_number)
        if key in table:
            return key
        if request.pass_number in table:
            return request.pass_number
        return None

    def complete(self, request: VLMRequest) -> str:
        self.requests.append(request)
        fail_key = self._lookup(self.failures, request)
        if fail_key is not None and self.failures[fail_key]:
            raise self.failures[fail_key].pop(0)
        resp_key = self._lookup(self.responses, request)
        if resp_key is None:
            raise FatalClientError(
                f"no scripted response for chunk {request.chunk_key!r} pass {request.pass_number}"
            )
        scripted = self.responses[resp_key]
        if isinstance(scripted, list):
            return scripted.pop(0) if len(scripted) > 1 else scripted[0]
        return scripted

    def prewarm(self) -> bool:
        return True
