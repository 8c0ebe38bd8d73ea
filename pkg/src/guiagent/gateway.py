"""Chat-completion backends: OpenAI-compatible HTTP, scripted playback, record/replay."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .actions import ToolCall

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4-0125-preview"


class GatewayError(RuntimeError):
    """Any backend failure; aborts the current round but not the episode."""


class GatewayTimeout(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class CassetteMiss(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: Sequence[Mapping[str, str]]
    model: str = DEFAULT_MODEL
    tool_schemas: Sequence[Mapping[str, Any]] | None = None
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def prompt(self) -> str:
        return "\n".join(m["content"] for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str | None = None
    tool_calls: tuple[ToolCall, ...] | None = None
    usage: Mapping[str, int] = field(default_factory=dict)
    latency: float = 0.0

    def to_json(self) -> dict[str, Any]:
        """Wire-stable form; latency is left out so recordings compare byte-for-byte."""
        data: dict[str, Any] = {"text": self.text}
        if self.tool_calls is not None:
            data["tool_calls"] = [
                {"name": c.name, "arguments": c.arguments if isinstance(c.arguments, str) else json.dumps(c.arguments)}
                for c in self.tool_calls
            ]
        if self.usage:
            data["usage"] = dict(self.usage)
        return data

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ChatResponse":
        calls = data.get("tool_calls")
        return cls(
            text=data.get("text"),
            tool_calls=tuple(ToolCall(c["name"], c["arguments"]) for c in calls) if calls is not None else None,
            usage=data.get("usage") or {},
        )


class Backend(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


def request_hash(req: ChatRequest) -> str:
    """Stable key over model, messages and tool schemas (sampling knobs excluded)."""
    payload = {
        "model": req.model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in req.messages],
        "tools": list(req.tool_schemas) if req.tool_schemas else None,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def wire_body(req: ChatRequest) -> dict[str, Any]:
    body: dict[str, Any] = {
        "model": req.model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in req.messages],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.tool_schemas:
        body["tools"] = [{"type": "function", "function": dict(s)} for s in req.tool_schemas]
        body["tool_choice"] = "auto"
    return body


def parse_wire_response(data: Mapping[str, Any], latency: float = 0.0) -> ChatResponse:
    try:
        message = data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise TransportError(f"unexpected response body: {str(data)[:200]}") from None
    calls = None
    if message.get("tool_calls"):
        calls = tuple(
            ToolCall(c["function"]["name"], c["function"].get("arguments") or "{}")
            for c in message["tool_calls"]
        )
    usage = {k: v for k, v in (data.get("usage") or {}).items() if isinstance(v, int)}
    text = message.get("content")
    if text is None and calls is None:
        raise TransportError("response has neither content nor tool calls")
    return ChatResponse(text=text, tool_calls=calls, usage=usage, latency=latency)


class HttpBackend:
    """OpenAI-compatible ``POST /chat/completions`` with bounded retries."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        api_key_env: str = "OPENAI_API_KEY",
        max_retries: int = 3,
        backoff: Sequence[float] = (1.0, 2.0, 4.0),
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        url = endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        self.url = url
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.max_retries = max_retries
        self.backoff = tuple(backoff)
        self.client = client or httpx.Client()
        self.sleep = sleep
        self.attempts = 0

    def _delay(self, attempt: int) -> float:
        if not self.backoff:
            return 0.0
        return self.backoff[min(attempt, len(self.backoff) - 1)]

    def complete(self, req: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = wire_body(req)
        last: GatewayError | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self._delay(attempt - 1))
            self.attempts += 1
            started = time.monotonic()
            try:
                resp = self.client.post(self.url, json=body, headers=headers, timeout=req.timeout)
            except httpx.TimeoutException as exc:
                last = GatewayTimeout(f"request timed out after {req.timeout}s: {exc}")
                continue
            except httpx.HTTPError as exc:
                last = TransportError(f"transport failure: {exc}")
                continue
            if resp.status_code == 429:
                last = RateLimited("rate limited (HTTP 429)")
                continue
            if resp.status_code >= 500:
                last = TransportError(f"server error HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:300]}")
            try:
                data = resp.json()
            except ValueError:
                raise TransportError("response body is not JSON") from None
            return parse_wire_response(data, time.monotonic() - started)
        log.warning("giving up after %d attempts: %s", self.max_retries + 1, last)
        assert last is not None
        raise last


class ScriptedBackend:
    """Playback of canned responses.

    Sequence mode pops ``responses`` in order; keyed mode looks the request hash
    up in ``keyed``. ``fallback`` (a function of the request) answers whatever
    the script does not cover.
    """

    def __init__(
        self,
        responses: Iterable[str | ChatResponse | Exception] = (),
        keyed: Mapping[str, str | ChatResponse] | None = None,
        fallback: Callable[[ChatRequest], str | ChatResponse] | None = None,
    ):
        self._queue = deque(responses)
        self._keyed = dict(keyed or {})
        self._fallback = fallback
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    @staticmethod
    def _wrap(item: str | ChatResponse) -> ChatResponse:
        return item if isinstance(item, ChatResponse) else ChatResponse(text=item)

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
            if self._keyed:
                key = request_hash(req)
                if key in self._keyed:
                    return self._wrap(self._keyed[key])
            if self._queue:
                item = self._queue.popleft()
                if isinstance(item, Exception):
                    raise item
                return self._wrap(item)
        if self._fallback is not None:
            return self._wrap(self._fallback(req))
        raise ScriptExhausted("scripted backend has no response left")


class Cassette:
    """request-hash -> response map persisted as one JSON file."""

    def __init__(self, entries: Mapping[str, Mapping[str, Any]] | None = None, path: Path | None = None):
        self.entries: dict[str, dict[str, Any]] = {k: dict(v) for k, v in (entries or {}).items()}
        self.path = path
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        return cls(data.get("entries", {}), path)

    def save(self, path: str | Path | None = None) -> Path:
        path = Path(path or self.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            blob = json.dumps({"entries": self.entries}, sort_keys=True, indent=1, ensure_ascii=False)
        path.write_text(blob + "\n", encoding="utf-8")
        return path

    def get(self, key: str) -> ChatResponse | None:
        with self._lock:
            entry = self.entries.get(key)
        return ChatResponse.from_json(entry) if entry is not None else None

    def put(self, key: str, response: ChatResponse) -> None:
        with self._lock:
            self.entries.setdefault(key, response.to_json())

    def __len__(self) -> int:
        return len(self.entries)


class ReplayBackend:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def complete(self, req: ChatRequest) -> ChatResponse:
        found = self.cassette.get(request_hash(req))
        if found is None:
            raise CassetteMiss(f"no recorded response for request {request_hash(req)[:12]}")
        return found


class RecordingBackend:
    """Forwards to ``inner`` and stores each response under its request hash."""

    def __init__(self, inner: Backend, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def complete(self, req: ChatRequest) -> ChatResponse:
        response = self.inner.complete(req)
        self.cassette.put(request_hash(req), response)
        # replay returns the stored form, so hand back the same
        return self.cassette.get(request_hash(req)) or response
