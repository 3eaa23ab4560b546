"""Auditable cost accounting at call, turn, and episode granularity.

CallRecords are append-only: one record per provider invocation attempt,
including retries and cache hits. All sums are exact integer nano-USD.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .catalog import PriceSchedule, ZERO_PRICES
from .money import Money, usd_string

OUTCOMES = ("ok", "timeout", "provider_error")

DEFAULT_PER_TURN_CAP: Money = 100_000_000  # $0.10


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int
    completion_tokens: int

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError(f"token counts must be >= 0: {self}")


@dataclass(frozen=True)
class CallRecord:
    """Immutable audit row for one provider invocation attempt."""

    call_id: str
    episode_id: str
    turn_index: int
    model_name: str
    request_digest: str
    usage: TokenUsage
    cost: Money
    latency_ms: int
    cached: bool
    outcome: str
    retry_count: int = 0

    # cached/cost consistency is deliberately not enforced here: audit_check
    # must be able to enumerate violations on records read back from disk.
    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    def to_dict(self) -> dict:
        return {
            "call_id": self.call_id,
            "episode_id": self.episode_id,
            "turn_index": self.turn_index,
            "model_name": self.model_name,
            "request_digest": self.request_digest,
            "usage": {
                "prompt_tokens": self.usage.prompt_tokens,
                "completion_tokens": self.usage.completion_tokens,
            },
            "cost": {"nano_usd": self.cost, "usd": usd_string(self.cost)},
            "latency_ms": self.latency_ms,
            "cached": self.cached,
            "outcome": self.outcome,
            "retry_count": self.retry_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CallRecord":
        return cls(
            call_id=doc["call_id"],
            episode_id=doc["episode_id"],
            turn_index=doc["turn_index"],
            model_name=doc["model_name"],
            request_digest=doc["request_digest"],
            usage=TokenUsage(
                prompt_tokens=doc["usage"]["prompt_tokens"],
                completion_tokens=doc["usage"]["completion_tokens"],
            ),
            cost=doc["cost"]["nano_usd"],
            latency_ms=doc["latency_ms"],
            cached=doc["cached"],
            outcome=doc["outcome"],
            retry_count=doc["retry_count"],
        )


@dataclass(frozen=True)
class CostConfig:
    """Per-turn normalization cap plus the router's own (default free) prices."""

    per_turn_cap: Money = DEFAULT_PER_TURN_CAP
    router_self_prices: PriceSchedule = field(default_factory=lambda: ZERO_PRICES)

    def __post_init__(self) -> None:
        if self.per_turn_cap <= 0:
            raise ValueError("per_turn_cap must be > 0")


def call_cost(usage: TokenUsage, prices: PriceSchedule) -> Money:
    """prompt*input + completion*output + overhead, exact integer nano-USD."""
    return (
        usage.prompt_tokens * prices.input_price
        + usage.completion_tokens * prices.output_price
        + prices.fixed_overhead
    )


def normalize_cost(cost: Money, cap: Money) -> float:
    """Map raw spend into [0, 1]: cost/cap exactly below the cap, clamped at 1."""
    if cap <= 0:
        raise ValueError("normalization cap must be > 0")
    if cost < 0:
        raise ValueError("cost must be >= 0")
    if cost >= cap:
        return 1.0
    return cost / cap


def aggregate(records: Sequence[CallRecord], turn: int | None = None) -> Money:
    """Exact cost sum over an episode's ledger, optionally for a single turn.

    All records must belong to one episode; mixing episodes is an error.
    """
    episodes = {r.episode_id for r in records}
    if len(episodes) > 1:
        raise ValueError(f"records span multiple episodes: {sorted(episodes)}")
    if turn is None:
        return sum(r.cost for r in records)
    return sum(r.cost for r in records if r.turn_index == turn)


@dataclass(frozen=True)
class AuditVerdict:
    ok: bool
    violations: tuple[dict, ...]


def audit_check(records: Sequence[CallRecord], reported_episode_cost: Money) -> AuditVerdict:
    """Verify the ledger: exact sum matches the reported cost, invariants hold.

    Violations are enumerated, not raised, so callers can log all of them.
    """
    violations: list[dict] = []
    episodes = {r.episode_id for r in records}
    if len(episodes) > 1:
        violations.append({"code": "mixed-episodes", "episodes": sorted(episodes)})
    for record in records:
        if record.cached and record.cost != 0:
            violations.append({"code": "cached-nonzero-cost", "call_id": record.call_id})
        if record.cost < 0:
            violations.append({"code": "negative-cost", "call_id": record.call_id})
    actual = sum(r.cost for r in records)
    if actual != reported_episode_cost:
        violations.append(
            {"code": "cost-mismatch", "expected": actual, "actual": reported_episode_cost}
        )
    return AuditVerdict(ok=not violations, violations=tuple(violations))


def ledger_jsonl(records: Iterable[CallRecord]) -> str:
    """One JSON record per line, costs as integer nano-USD plus a usd string."""
    return "".join(json.dumps(r.to_dict(), separators=(",", ":")) + "\n" for r in records)


def read_ledger_jsonl(text: str) -> list[CallRecord]:
    return [CallRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
