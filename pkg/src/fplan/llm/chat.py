"""Provider-agnostic chat calls with record/replay cassettes."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

MODES = ("record", "replay", "passthrough")
MAX_NETWORK_ATTEMPTS = 3
ENV_BASE_URL = "FPLAN_API_BASE"
ENV_API_KEY = "FPLAN_API_KEY"
ENV_MODEL = "FPLAN_MODEL"


class NetworkError(Exception):
    pass


class CassetteMiss(KeyError):
    def __init__(self, fingerprint: str, stage: str = ""):
        super().__init__(fingerprint)
        self.fingerprint = fingerprint
        self.stage = stage

    def __str__(self) -> str:
        where = f" ({self.stage})" if self.stage else ""
        return f"no recorded response for request {self.fingerprint[:16]}{where}"


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        object.__setattr__(self, "messages", tuple((str(r), str(c)) for r, c in self.messages))

    def fingerprint(self) -> str:
        # max_tokens is deliberately left out: it does not change what is asked
        payload = {
            "model_id": self.model_id,
            "temperature": float(self.temperature),
            "messages": [[r, c] for r, c in self.messages],
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ChatRequest":
        msgs = tuple((m["role"], m["content"]) for m in d["messages"])
        return cls(d["model_id"], msgs, d.get("temperature", 0.0), d.get("max_tokens"))


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cached: bool = field(default=False, compare=False)

    @property
    def usage(self) -> dict:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}


class Provider(Protocol):
    def __call__(self, request: ChatRequest) -> ChatResponse: ...


class Cassette:
    """Fingerprint → response store backed by an NDJSON file.

    Lookups may run concurrently; appends are serialized and flushed before
    the response is handed back.
    """

    def __init__(self, path: str | Path | None = None, mode: str = "replay"):
        if mode not in MODES:
            raise ValueError(f"cassette mode must be one of {MODES}")
        self.path = Path(path) if path else None
        self.mode = mode
        self._lock = threading.Lock()
        self.entries: dict[str, dict] = {}
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self.entries[rec["fingerprint"]] = rec

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self.entries

    def lookup(self, request: ChatRequest) -> ChatResponse | None:
        rec = self.entries.get(request.fingerprint())
        if rec is None:
            return None
        usage = rec.get("usage", {})
        return ChatResponse(rec["response"], usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0), cached=True)

    def record(self, request: ChatRequest, response: ChatResponse) -> None:
        fp = request.fingerprint()
        rec = {"fingerprint": fp, "request": request.to_dict(), "response": response.text, "usage": response.usage}
        with self._lock:
            if fp in self.entries:
                return
            self.entries[fp] = rec
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
                    fh.flush()

    def records(self) -> Iterable[dict]:
        return list(self.entries.values())


class OpenAICompatibleProvider:
    """POSTs to ``{base_url}/chat/completions`` in the common JSON shape."""

    def __init__(self, base_url: str | None = None, api_key: str | None = None, timeout: float = 120.0):
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL) or "https://api.openai.com/v1").rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.timeout = timeout

    def __call__(self, request: ChatRequest) -> ChatResponse:
        body: dict[str, Any] = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout)
        except httpx.TransportError as exc:
            raise NetworkError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise NetworkError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        data = resp.json()
        usage = data.get("usage") or {}
        return ChatResponse(
            data["choices"][0]["message"]["content"] or "",
            usage.get("prompt_tokens", 0),
            usage.get("completion_tokens", 0),
        )


class ChatClient:
    """Routes requests through a cassette and, when allowed, a provider."""

    def __init__(
        self,
        cassette: Cassette | None = None,
        provider: Provider | None = None,
        model_id: str | None = None,
        temperature: float = 0.0,
        max_tokens: int | None = None,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cassette = cassette if cassette is not None else Cassette(mode="passthrough")
        self.provider = provider
        self.model_id = model_id or os.environ.get(ENV_MODEL, "gpt-4o")
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.backoff = backoff
        self._sleep = sleep
        self.network_calls = 0

    def request(self, messages: Iterable[tuple[str, str]]) -> ChatRequest:
        return ChatRequest(self.model_id, tuple(messages), self.temperature, self.max_tokens)

    def chat(self, request: ChatRequest, stage: str = "") -> ChatResponse:
        mode = self.cassette.mode
        if mode != "passthrough":
            hit = self.cassette.lookup(request)
            if hit is not None:
                return hit
            if mode == "replay":
                raise CassetteMiss(request.fingerprint(), stage)
        response = self._call_provider(request)
        if mode == "record":
            self.cassette.record(request, response)
        return response

    def _call_provider(self, request: ChatRequest) -> ChatResponse:
        if self.provider is None:
            raise NetworkError("no chat provider configured")
        delay = self.backoff
        for attempt in range(1, MAX_NETWORK_ATTEMPTS + 1):
            try:
                self.network_calls += 1
                return self.provider(request)
            except NetworkError:
                if attempt == MAX_NETWORK_ATTEMPTS:
                    raise
                self._sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")
