"""Turn execution: concurrent fan-out, debounced retries, budget guard, ledger.

One provider invocation attempt always yields exactly one CallRecord, whether
it succeeded, failed, or was served from cache. Result order is the call-list
order, never completion order, so replays are stable under latency noise.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .catalog import Catalog, ModelDescriptor
from .ledger import CallRecord, CostConfig, Money, TokenUsage, call_cost
from .protocol import CallModel
from .providers import Backend, ProviderFailure, ProviderRequest, normalize_query

DEFAULT_EPISODE_BUDGET: Money = 1_000_000_000  # $1.00


@dataclass(frozen=True)
class EpisodeLimits:
    max_turns: int = 3
    fan_out_cap: int = 1
    retry_max: int = 2
    retry_debounce_ms: int = 250
    episode_budget: Money = DEFAULT_EPISODE_BUDGET
    call_deadline_ms: int = 60_000

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if self.fan_out_cap < 1:
            raise ValueError("fan_out_cap must be >= 1")
        if self.retry_max < 0:
            raise ValueError("retry_max must be >= 0")


class BudgetExceededError(Exception):
    """Accumulated episode cost reached the budget; turn rejected pre-dispatch."""


class SystemClock:
    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)


class VirtualClock:
    """Instant clock for simulated runs: debounce waits advance a counter."""

    def __init__(self) -> None:
        self._now = 0.0
        self._lock = threading.Lock()

    def now_ms(self) -> float:
        with self._lock:
            return self._now

    def sleep(self, ms: float) -> None:
        with self._lock:
            self._now += max(ms, 0.0)


@dataclass(frozen=True)
class RetryDecision:
    retry: bool
    wait_ms: float = 0.0


GIVE_UP = RetryDecision(retry=False)


def retry_policy(
    outcome: str,
    attempt: int,
    limits: EpisodeLimits,
    *,
    elapsed_since_attempt_ms: float = 0.0,
    spent: Money = 0,
    next_attempt_cost: Money = 0,
) -> RetryDecision:
    """Retry failures with debounce spacing, never past the budget.

    Successful calls are never retried; the wait enforces at least
    retry_debounce_ms between attempt starts; a retry whose worst-case prompt
    cost would cross the episode budget is abandoned instead.
    """
    if outcome == "ok":
        return GIVE_UP
    if attempt >= limits.retry_max:
        return GIVE_UP
    if spent + next_attempt_cost > limits.episode_budget:
        return GIVE_UP
    wait = max(0.0, limits.retry_debounce_ms - elapsed_since_attempt_ms)
    return RetryDecision(retry=True, wait_ms=wait)


@dataclass
class TurnResult:
    # every attempt, ordered by (call slot, attempt index)
    records: list[CallRecord] = field(default_factory=list)
    # one entry per call slot: the final attempt's record and its response
    # (None when every attempt failed)
    results: list[tuple[CallRecord, object]] = field(default_factory=list)
    cost: Money = 0


class _TurnSpend:
    def __init__(self, base: Money):
        self._total = base
        self._lock = threading.Lock()

    def add(self, amount: Money) -> None:
        with self._lock:
            self._total += amount

    def total(self) -> Money:
        with self._lock:
            return self._total


class Orchestrator:
    """Executes validated turns against one catalog snapshot."""

    def __init__(
        self,
        backend: Backend,
        catalog: Catalog,
        cost_config: CostConfig,
        limits: EpisodeLimits,
        clock=None,
    ):
        self.backend = backend
        self.catalog = catalog
        self.cost_config = cost_config
        self.limits = limits
        self.clock = clock if clock is not None else VirtualClock()

    def _build_request(self, call: CallModel, descriptor: ModelDescriptor, task) -> ProviderRequest:
        messages: list[tuple[str, str]] = []
        if call.system_prompt_override:
            messages.append(("system", call.system_prompt_override))
        messages.append(("user", call.payload))
        max_out = 4096
        if descriptor.capability is not None:
            max_out = descriptor.capability.output_tokens_max
        return ProviderRequest(
            model_name=call.model_name,
            messages=tuple(messages),
            temperature=call.temperature if call.temperature is not None else 1.0,
            top_p=call.top_p if call.top_p is not None else 1.0,
            max_output_tokens=max_out,
            deadline_ms=self.limits.call_deadline_ms,
        )

    def _run_call(
        self,
        slot: int,
        call: CallModel,
        *,
        episode_id: str,
        turn_index: int,
        task,
        spend: _TurnSpend,
    ) -> list[tuple[CallRecord, object]]:
        descriptor = self.catalog.get(call.model_name)
        request = self._build_request(call, descriptor, task)
        digest = normalize_query(request)
        prompt_tokens = request.prompt_tokens()
        # worst case billed on a failed attempt: prompt side plus overhead
        failure_cost = call_cost(TokenUsage(prompt_tokens, 0), descriptor.prices)
        attempts: list[tuple[CallRecord, object]] = []
        attempt = 0
        while True:
            attempt_started = self.clock.now_ms()
            call_id = f"{episode_id}-t{turn_index}-s{slot}-a{attempt}"
            try:
                response, cached = self.backend.invoke(
                    request, descriptor=descriptor, task=task, attempt=attempt
                )
                cost = 0 if cached else call_cost(response.usage, descriptor.prices)
                record = CallRecord(
                    call_id=call_id,
                    episode_id=episode_id,
                    turn_index=turn_index,
                    model_name=call.model_name,
                    request_digest=digest,
                    usage=response.usage,
                    cost=cost,
                    latency_ms=response.latency_ms,
                    cached=cached,
                    outcome="ok",
                    retry_count=attempt,
                )
                spend.add(cost)
                attempts.append((record, response))
                return attempts
            except ProviderFailure as failure:
                record = CallRecord(
                    call_id=call_id,
                    episode_id=episode_id,
                    turn_index=turn_index,
                    model_name=call.model_name,
                    request_digest=digest,
                    usage=TokenUsage(prompt_tokens, 0),
                    cost=failure_cost,
                    latency_ms=request.deadline_ms if failure.kind == "timeout" else 0,
                    cached=False,
                    outcome=failure.kind,
                    retry_count=attempt,
                )
                spend.add(failure_cost)
                attempts.append((record, None))
                elapsed = self.clock.now_ms() - attempt_started
                decision = retry_policy(
                    failure.kind,
                    attempt,
                    self.limits,
                    elapsed_since_attempt_ms=elapsed,
                    spent=spend.total(),
                    next_attempt_cost=failure_cost,
                )
                if not decision.retry:
                    return attempts
                self.clock.sleep(decision.wait_ms)
                attempt += 1

    def dispatch_turn(
        self,
        calls: list[CallModel],
        *,
        episode_id: str,
        turn_index: int,
        task,
        accumulated_cost: Money,
    ) -> TurnResult:
        """Dispatch a validated turn; returns all records in call-list order.

        Rejects outright (zero new records) when the episode has already
        reached its budget. Per-call failures are recorded, never raised.
        """
        if accumulated_cost >= self.limits.episode_budget:
            raise BudgetExceededError(
                f"episode cost {accumulated_cost} reached budget {self.limits.episode_budget}"
            )
        if len(calls) > self.limits.fan_out_cap:
            raise ValueError(
                f"turn has {len(calls)} calls but fan_out_cap is {self.limits.fan_out_cap}"
            )
        spend = _TurnSpend(accumulated_cost)
        if len(calls) == 1:
            per_slot = [
                self._run_call(
                    0, calls[0], episode_id=episode_id, turn_index=turn_index, task=task, spend=spend
                )
            ]
        else:
            with ThreadPoolExecutor(max_workers=len(calls)) as pool:
                futures = [
                    pool.submit(
                        self._run_call,
                        slot,
                        call,
                        episode_id=episode_id,
                        turn_index=turn_index,
                        task=task,
                        spend=spend,
                    )
                    for slot, call in enumerate(calls)
                ]
                per_slot = [f.result() for f in futures]
        result = TurnResult()
        for slot_attempts in per_slot:
            result.records.extend(record for record, _ in slot_attempts)
            result.results.append(slot_attempts[-1])
        result.cost = sum(r.cost for r in result.records)
        return result
