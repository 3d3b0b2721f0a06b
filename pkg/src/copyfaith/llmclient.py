"""Uniform client for chat-completion and embedding endpoints.

Speaks the common OpenAI-compatible wire shape over HTTP, retries
transient failures with exponential backoff, and serves repeated
temperature-0 requests from a content-addressed on-disk cache. A
scriptable mock backend stands in for the network in tests.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import httpx

from .errors import CopyFaithError


class TransportError(CopyFaithError):
    """Request could not be completed (retries exhausted or fatal status)."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class ProtocolError(CopyFaithError):
    """Backend replied, but the payload does not have the expected shape."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class TransientBackendError(CopyFaithError):
    """Retryable failure (connection trouble, timeouts, 429/5xx)."""


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    want_logprobs: bool = False
    top_logprobs: int = 0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 <= self.top_logprobs <= 20:
            raise ValueError("top_logprobs must be in [0, 20]")
        if self.want_logprobs and self.top_logprobs < 1:
            raise ValueError("want_logprobs requires top_logprobs >= 1")


def user_request(model_id: str, prompt: str, **kwargs) -> ChatRequest:
    """Single-user-message request, the shape every prompt here uses."""
    return ChatRequest(model_id=model_id, messages=(("user", prompt),), **kwargs)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    token_logprobs: tuple[tuple[tuple[str, float], ...], ...] | None = None
    usage: tuple[tuple[str, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "token_logprobs": (
                None
                if self.token_logprobs is None
                else [[[t, lp] for t, lp in pos] for pos in self.token_logprobs]
            ),
            "usage": [[k, v] for k, v in self.usage],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatResponse":
        tl = d.get("token_logprobs")
        return cls(
            text=d["text"],
            finish_reason=d.get("finish_reason", "stop"),
            token_logprobs=(
                None
                if tl is None
                else tuple(tuple((t, float(lp)) for t, lp in pos) for pos in tl)
            ),
            usage=tuple((k, int(v)) for k, v in d.get("usage", [])),
        )


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding entries must be finite")


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    dot = sum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(sum(x * x for x in a.values))
    nb = math.sqrt(sum(y * y for y in b.values))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


class HttpBackend:
    """OpenAI-compatible /chat/completions and /embeddings over HTTP.

    Base URL and key fall back to COPYFAITH_API_BASE / COPYFAITH_API_KEY.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = (base_url or os.environ.get("COPYFAITH_API_BASE", "")).rstrip("/")
        if not self.base_url:
            raise TransportError("no API base URL configured")
        self.api_key = api_key or os.environ.get("COPYFAITH_API_KEY", "")
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, path: str, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(self.base_url + path, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise TransientBackendError(f"connection failure: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"retryable status {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise TransportError(f"request rejected with status {resp.status_code}", payload=resp.text)
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError("response body is not JSON", payload=resp.text) from exc

    def complete(self, req: ChatRequest) -> ChatResponse:
        body = {
            "model": req.model_id,
            "messages": [{"role": r, "content": c} for r, c in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.want_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = req.top_logprobs
        payload = self._post("/chat/completions", body)
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason") or "stop"
            token_logprobs = None
            if req.want_logprobs:
                content = (choice.get("logprobs") or {}).get("content") or []
                token_logprobs = tuple(
                    tuple(
                        sorted(
                            ((alt["token"], float(alt["logprob"])) for alt in pos.get("top_logprobs", [])),
                            key=lambda p: -p[1],
                        )[: req.top_logprobs]
                    )
                    for pos in content
                )
            usage = tuple(sorted((k, int(v)) for k, v in (payload.get("usage") or {}).items()))
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat payload: {exc}", payload=payload) from exc
        return ChatResponse(text=text, finish_reason=finish, token_logprobs=token_logprobs, usage=usage)

    def embed(self, text: str, model_id: str) -> EmbeddingVector:
        payload = self._post("/embeddings", {"model": model_id, "input": text})
        try:
            values = tuple(float(v) for v in payload["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed embedding payload: {exc}", payload=payload) from exc
        return EmbeddingVector(values=values, model_id=model_id)


class MockBackend:
    """Scriptable in-memory backend.

    ``chat_script`` may be a string, a ChatResponse, an exception to
    raise, a callable of the request, or a list of any of these played
    in order (the last entry repeats). ``embed_script`` maps text to a
    vector; defaults to a constant unit vector.
    """

    def __init__(self, chat_script="OK", embed_script=None):
        self._chat_script = chat_script
        self._embed_script = embed_script
        self._lock = threading.Lock()
        self.chat_calls = 0
        self.embed_calls = 0
        self.requests: list[ChatRequest] = []

    def _resolve(self, item, req):
        if isinstance(item, Exception):
            raise item
        if callable(item):
            return self._resolve(item(req), req)
        if isinstance(item, ChatResponse):
            return item
        return ChatResponse(text=str(item))

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            n = self.chat_calls
            self.chat_calls += 1
            self.requests.append(req)
        script = self._chat_script
        if isinstance(script, list):
            script = script[min(n, len(script) - 1)]
        return self._resolve(script, req)

    def embed(self, text: str, model_id: str) -> EmbeddingVector:
        with self._lock:
            self.embed_calls += 1
        if self._embed_script is None:
            values = (1.0, 0.0, 0.0)
        else:
            values = tuple(float(v) for v in self._embed_script(text))
        return EmbeddingVector(values=values, model_id=model_id)


def canonical_chat_key(req: ChatRequest) -> str:
    blob = json.dumps(asdict(req), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(("chat:" + blob).encode("utf-8")).hexdigest()


def canonical_embed_key(text: str, model_id: str) -> str:
    blob = json.dumps({"model": model_id, "text": text}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(("embed:" + blob).encode("utf-8")).hexdigest()


class LLMClient:
    """Backend wrapper adding retry, caching, and a concurrency bound.

    Only temperature-0 chat requests are cached (sampled generations
    must stay stochastic); embeddings are deterministic and always
    cached. Cache entries are keyed by a canonical serialization of the
    request, and a hit reproduces the original response byte for byte.
    """

    def __init__(
        self,
        backend,
        *,
        chat_model_id: str = "default",
        embedding_model_id: str = "embed",
        cache_dir: str | Path | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        max_concurrency: int = 8,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.backend = backend
        self.chat_model_id = chat_model_id
        self.embedding_model_id = embedding_model_id
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleeper
        self._sem = threading.Semaphore(max_concurrency)
        self._cache_lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self.backend_calls = 0
        self.cache_hits = 0

    def _cache_path(self, key: str) -> Path | None:
        return self.cache_dir / f"{key}.json" if self.cache_dir else None

    def _cache_read(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if path is None:
            return None
        with self._cache_lock:
            if path.exists():
                return json.loads(path.read_text(encoding="utf-8"))
        return None

    def _cache_write(self, key: str, payload: dict) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        with self._cache_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")
            tmp.replace(path)

    def _call_with_retry(self, fn):
        last_exc = None
        delay = self.backoff_base
        for attempt in range(self.max_attempts):
            if attempt > 0:
                self._sleep(delay)
                delay *= 2
            try:
                with self._sem:
                    with self._stats_lock:
                        self.backend_calls += 1
                    return fn()
            except TransientBackendError as exc:
                last_exc = exc
        raise TransportError(
            f"retries exhausted after {self.max_attempts} attempts: {last_exc}",
            payload=getattr(last_exc, "payload", None),
        )

    def chat(self, req: ChatRequest) -> ChatResponse:
        cacheable = req.temperature == 0
        key = canonical_chat_key(req) if cacheable else None
        if cacheable:
            cached = self._cache_read(key)
            if cached is not None:
                with self._stats_lock:
                    self.cache_hits += 1
                return ChatResponse.from_dict(cached)
        resp = self._call_with_retry(lambda: self.backend.complete(req))
        if cacheable:
            self._cache_write(key, resp.to_dict())
        return resp

    def embed(self, text: str) -> EmbeddingVector:
        key = canonical_embed_key(text, self.embedding_model_id)
        cached = self._cache_read(key)
        if cached is not None:
            with self._stats_lock:
                self.cache_hits += 1
            return EmbeddingVector(values=tuple(cached["values"]), model_id=cached["model_id"])
        vec = self._call_with_retry(lambda: self.backend.embed(text, self.embedding_model_id))
        self._cache_write(key, {"values": list(vec.values), "model_id": vec.model_id})
        return vec
