"""Uniform invocation over simulated, cached, and live model backends.

Backends expose one method:

    invoke(request, descriptor=..., task=..., attempt=...) -> (response, cached)

and raise ProviderFailure (kind "timeout" or "provider_error") on anything
that should be billed as a failed attempt. The simulated backend is a pure
function of (seed, task id, model, attempt, request), which is what makes
whole runs replayable bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

import httpx

from .catalog import ModelDescriptor
from .ledger import TokenUsage
from .rng import int_in_range, stable_hash64, unit_float

DEFAULT_DEADLINE_MS = 60_000

# Fixed stand-in tokenizer: whitespace words * 4/3, rounded up. Absolute
# token truth is irrelevant; determinism is what the ledger invariants need.
def count_tokens(text: str) -> int:
    words = len(text.split())
    return (words * 4 + 2) // 3


@dataclass(frozen=True)
class ProviderRequest:
    model_name: str
    messages: tuple[tuple[str, str], ...]  # (role, text) pairs
    temperature: float = 1.0
    top_p: float = 1.0
    max_output_tokens: int = 4096
    deadline_ms: int = DEFAULT_DEADLINE_MS

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request must carry at least one message")
        if self.deadline_ms <= 0:
            raise ValueError("deadline_ms must be > 0")

    def prompt_tokens(self) -> int:
        return sum(count_tokens(text) for _, text in self.messages)


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    usage: TokenUsage
    latency_ms: int
    correctness_hint: bool | None = None

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "usage": {
                "prompt_tokens": self.usage.prompt_tokens,
                "completion_tokens": self.usage.completion_tokens,
            },
            "latency_ms": self.latency_ms,
            "correctness_hint": self.correctness_hint,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProviderResponse":
        return cls(
            text=doc["text"],
            usage=TokenUsage(doc["usage"]["prompt_tokens"], doc["usage"]["completion_tokens"]),
            latency_ms=doc["latency_ms"],
            correctness_hint=doc.get("correctness_hint"),
        )


class ProviderFailure(Exception):
    """A billable failed attempt; kind maps onto the CallRecord outcome."""

    def __init__(self, kind: str, detail: str):
        if kind not in ("timeout", "provider_error"):
            raise ValueError(f"unknown failure kind {kind!r}")
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


_WHITESPACE_RUN = re.compile(r"\s+")


def normalize_query(req: ProviderRequest) -> str:
    """Digest of the canonical request form (sha256 hex).

    Whitespace is trimmed and collapsed per message, sampling params are
    rounded to two decimals, case is preserved: equivalent queries land on
    the same cache key, different models or texts never collide in practice.
    """
    canonical = {
        "model": req.model_name,
        "messages": [
            [role, _WHITESPACE_RUN.sub(" ", text.strip())] for role, text in req.messages
        ],
        "temperature": f"{req.temperature:.2f}",
        "top_p": f"{req.top_p:.2f}",
    }
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class Backend(Protocol):
    def invoke(
        self, req: ProviderRequest, *, descriptor: ModelDescriptor, task, attempt: int
    ) -> tuple[ProviderResponse, bool]: ...


_DISTRACTOR_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


def _letters(h: int, length: int = 10) -> str:
    # letters-only so distractors never contain numeric reference answers
    chars = []
    for _ in range(length):
        h, rem = divmod(h, 26)
        chars.append(_DISTRACTOR_ALPHABET[rem])
    return "".join(chars)


class SimulatedBackend:
    """Deterministic desk-scale model pool driven by capability profiles.

    A call is correct iff the hash draw for (seed, task id, model, attempt)
    falls below the model's accuracy for the task's difficulty tier. Correct
    calls answer with the task's reference answer verbatim; wrong calls
    produce a letters-only distractor that fails every verifier.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.invocations = 0

    def invoke(
        self, req: ProviderRequest, *, descriptor: ModelDescriptor, task, attempt: int
    ) -> tuple[ProviderResponse, bool]:
        if descriptor.capability is None:
            raise ProviderFailure(
                "provider_error", f"model {descriptor.name!r} has no capability profile"
            )
        self.invocations += 1
        capability = descriptor.capability
        tier = task.difficulty.tier
        accuracy = capability.accuracy_for(tier)
        draw = unit_float("correct", self.seed, task.id, descriptor.name, attempt)
        correct = draw < accuracy
        if correct and task.reference_answer:
            text = task.reference_answer
        elif correct:
            # unverifiable task (empty reference): deterministic freeform text
            h = stable_hash64("freeform", self.seed, task.id, descriptor.name, attempt)
            text = f"response {_letters(h)}"
        else:
            h = stable_hash64("distractor", self.seed, task.id, descriptor.name, attempt)
            text = f"wrong {_letters(h)}"
        completion = int_in_range(
            capability.output_tokens_min,
            capability.output_tokens_max,
            "tokens",
            self.seed,
            task.id,
            descriptor.name,
            attempt,
        )
        usage = TokenUsage(prompt_tokens=req.prompt_tokens(), completion_tokens=completion)
        response = ProviderResponse(
            text=text,
            usage=usage,
            latency_ms=capability.latency_ms_nominal,
            correctness_hint=correct,
        )
        return response, False


class CacheStoreError(Exception):
    pass


class CacheStore:
    """Append-only JSONL response cache with an in-memory index.

    The index is rebuilt on open (last entry per key wins); writes are
    serialized, reads are lock-free snapshots. A corrupt line fails open()
    loudly rather than producing silent misses.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, dict] = {}
        if self.path.exists():
            for lineno, line in enumerate(self.path.read_text().splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = entry["key"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CacheStoreError(f"{self.path}:{lineno}: corrupt cache entry: {exc}")
                self._index[key] = entry

    def __len__(self) -> int:
        return len(self._index)

    def get(self, key: str) -> ProviderResponse | None:
        entry = self._index.get(key)
        if entry is None:
            return None
        try:
            return ProviderResponse.from_dict(entry["response"])
        except (KeyError, TypeError) as exc:
            raise CacheStoreError(f"corrupt cache entry for key {key}: {exc}")

    def put(self, key: str, model_name: str, response: ProviderResponse) -> None:
        entry = {
            "key": key,
            "model_name": model_name,
            "stored_at": datetime.now(timezone.utc).isoformat(),
            "quality_score": None,
            "response": response.to_dict(),
        }
        with self._lock:
            try:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
            except OSError as exc:
                raise CacheStoreError(f"cannot append to cache store {self.path}: {exc}")
            self._index[key] = entry


class CachingBackend:
    """Memoizes an inner backend by normalized query.

    Hits return the stored response with zero marginal cost; misses invoke
    the inner backend exactly once and persist the result, so a warm store
    never re-invokes for the same normalized query.
    """

    def __init__(self, inner: Backend, store: CacheStore):
        self.inner = inner
        self.store = store

    def invoke(
        self, req: ProviderRequest, *, descriptor: ModelDescriptor, task, attempt: int
    ) -> tuple[ProviderResponse, bool]:
        key = normalize_query(req)
        try:
            hit = self.store.get(key)
        except CacheStoreError as exc:
            raise ProviderFailure("provider_error", f"cache-store: {exc}")
        if hit is not None:
            return hit, True
        response, _ = self.inner.invoke(req, descriptor=descriptor, task=task, attempt=attempt)
        try:
            self.store.put(key, descriptor.name, response)
        except CacheStoreError as exc:
            raise ProviderFailure("provider_error", f"cache-store: {exc}")
        return response, False


@dataclass(frozen=True)
class EndpointConfig:
    name: str
    base_url: str
    api_key_env: str = ""

    def api_key_variable(self) -> str:
        if self.api_key_env:
            return self.api_key_env
        return "XROUTER_API_KEY_" + re.sub(r"[^A-Z0-9]", "_", self.name.upper())


class LiveBackend:
    """One HTTP chat-completions request per invocation.

    Usage comes from the response's usage block; latency is wall-clock.
    Deadline overruns, non-2xx statuses, and malformed bodies all surface as
    typed failures so the orchestrator can bill and retry them.
    """

    def __init__(self, endpoints: dict[str, EndpointConfig], transport: httpx.BaseTransport | None = None):
        self.endpoints = endpoints
        self._transport = transport

    def invoke(
        self, req: ProviderRequest, *, descriptor: ModelDescriptor, task, attempt: int
    ) -> tuple[ProviderResponse, bool]:
        endpoint = self.endpoints.get(descriptor.name)
        if endpoint is None:
            raise ProviderFailure("provider_error", f"no endpoint configured for {descriptor.name!r}")
        headers = {}
        api_key = os.environ.get(endpoint.api_key_variable())
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": descriptor.name,
            "messages": [{"role": role, "content": text} for role, text in req.messages],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_output_tokens,
        }
        started = time.monotonic()
        try:
            with httpx.Client(
                base_url=endpoint.base_url,
                timeout=req.deadline_ms / 1000.0,
                transport=self._transport,
            ) as client:
                http_response = client.post("/chat/completions", json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise ProviderFailure("timeout", f"deadline {req.deadline_ms} ms exceeded: {exc}")
        except httpx.HTTPError as exc:
            raise ProviderFailure("provider_error", f"transport failure: {exc}")
        latency_ms = int((time.monotonic() - started) * 1000)
        if not 200 <= http_response.status_code < 300:
            raise ProviderFailure(
                "provider_error", f"http-status {http_response.status_code}"
            )
        try:
            doc = http_response.json()
            text = doc["choices"][0]["message"]["content"]
            usage = TokenUsage(
                prompt_tokens=int(doc["usage"]["prompt_tokens"]),
                completion_tokens=int(doc["usage"]["completion_tokens"]),
            )
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderFailure("provider_error", f"malformed-body: {exc}")
        return ProviderResponse(text=text, usage=usage, latency_ms=latency_ms), False


class PoolBackend:
    """Dispatches on descriptor.provider_kind over one catalog snapshot.

    `cached` models are served from the store alone (a miss is an error:
    precomputed pools must be complete); simulated/live models go to their
    backend, optionally memoized through the same store.
    """

    def __init__(
        self,
        seed: int,
        store: CacheStore | None = None,
        endpoints: dict[str, EndpointConfig] | None = None,
        cache_enabled: bool = False,
    ):
        self.simulated = SimulatedBackend(seed)
        self.live = LiveBackend(endpoints or {})
        self.store = store
        if cache_enabled and store is None:
            raise ValueError("cache_enabled requires a cache store")
        self.cache_enabled = cache_enabled

    def invoke(
        self, req: ProviderRequest, *, descriptor: ModelDescriptor, task, attempt: int
    ) -> tuple[ProviderResponse, bool]:
        if descriptor.provider_kind == "cached":
            if self.store is None:
                raise ProviderFailure("provider_error", "no cache store configured")
            try:
                hit = self.store.get(normalize_query(req))
            except CacheStoreError as exc:
                raise ProviderFailure("provider_error", f"cache-store: {exc}")
            if hit is None:
                raise ProviderFailure(
                    "provider_error", f"cache miss for cached-only model {descriptor.name!r}"
                )
            return hit, True
        inner: Backend = self.simulated if descriptor.provider_kind == "simulated" else self.live
        if self.cache_enabled and self.store is not None:
            inner = CachingBackend(inner, self.store)
        return inner.invoke(req, descriptor=descriptor, task=task, attempt=attempt)
