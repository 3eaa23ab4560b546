"""Bounded multi-turn routing episodes over a single task.

An episode asks the policy for at most max_turns decisions and ends in one
of three answer modes (direct, synthesized, selected) or as a failure.
Failures keep their accumulated cost but always earn zero reward. The
machine exposes a stepwise API so the same loop can be driven locally by a
Policy object or remotely through the gateway's reset/step protocol.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .catalog import Catalog, render_catalog_prompt
from .ledger import CallRecord, CostConfig, Money, TokenUsage, call_cost, normalize_cost
from .money import usd_string
from .orchestrator import BudgetExceededError, EpisodeLimits, Orchestrator
from .protocol import (
    CallModel,
    DirectAnswer,
    FinalSynthesis,
    ProtocolError,
    RouterMessage,
    SelectResponse,
    ToolCalls,
    serialize_router_message,
    serialize_tool_result,
    validate_calls,
)
from .providers import Backend, PoolBackend, count_tokens
from .reward import Outcome, RewardParams, reward as compute_reward
from .rng import stable_hash64

VERIFIERS = ("exact_match", "numeric_match", "contains")
STATUSES = ("running", "done_direct", "done_synthesized", "done_selected", "failed")

DEFAULT_STRATIFY_THRESHOLDS = (0.7, 0.3)


class TransportError(Exception):
    """A remote decision source failed; the episode fails as a protocol error."""


class EpisodeFinishedError(Exception):
    """Step called on an episode that already reached a terminal status."""


@dataclass(frozen=True)
class Difficulty:
    pass_rate: float
    tier: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.pass_rate <= 1.0:
            raise ValueError(f"pass_rate outside [0,1]: {self.pass_rate}")
        if self.tier not in ("easy", "medium", "hard"):
            raise ValueError(f"unknown difficulty tier {self.tier!r}")


@dataclass(frozen=True)
class Task:
    """One routable task. An empty reference answer marks the task as
    unverifiable (ad-hoc chat traffic): success is then always False."""

    id: str
    prompt: str
    reference_answer: str
    verifier: str
    difficulty: Difficulty

    def __post_init__(self) -> None:
        if self.verifier not in VERIFIERS:
            raise ValueError(f"unknown verifier {self.verifier!r}")


@dataclass(frozen=True)
class RunConfig:
    catalog: Catalog
    limits: EpisodeLimits = field(default_factory=EpisodeLimits)
    reward_params: RewardParams = field(default_factory=RewardParams)
    cost_config: CostConfig = field(default_factory=CostConfig)
    seed: int = 0


@dataclass(frozen=True)
class Observation:
    """Everything a policy may look at; fully serializable for the wire."""

    task_prompt: str
    catalog_text: str
    models: tuple[str, ...]
    transcript: tuple[dict, ...]
    remaining_turns: int

    def to_dict(self) -> dict:
        return {
            "task_prompt": self.task_prompt,
            "catalog_text": self.catalog_text,
            "models": list(self.models),
            "transcript": [dict(m) for m in self.transcript],
            "remaining_turns": self.remaining_turns,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Observation":
        return cls(
            task_prompt=doc["task_prompt"],
            catalog_text=doc["catalog_text"],
            models=tuple(doc["models"]),
            transcript=tuple(doc["transcript"]),
            remaining_turns=doc["remaining_turns"],
        )


@dataclass
class EpisodeState:
    episode_id: str
    task: Task
    catalog: Catalog
    turn_index: int = 0
    history: list[dict] = field(default_factory=list)
    records: list[CallRecord] = field(default_factory=list)
    accumulated_cost: Money = 0
    router_cost: Money = 0
    status: str = "running"
    failure_reason: str | None = None
    final_answer: str | None = None


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    task_id: str
    status: str
    failure_reason: str | None
    final_answer: str | None
    success: bool
    provider_cost: Money
    router_cost: Money
    cost: Money
    normalized_cost: float
    reward: float
    records: tuple[CallRecord, ...]

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "task_id": self.task_id,
            "status": self.status,
            "failure_reason": self.failure_reason,
            "final_answer": self.final_answer,
            "success": self.success,
            "provider_cost_nano_usd": self.provider_cost,
            "router_cost_nano_usd": self.router_cost,
            "cost_nano_usd": self.cost,
            "cost_usd": usd_string(self.cost),
            "normalized_cost": self.normalized_cost,
            "reward": self.reward,
            "records": [r.to_dict() for r in self.records],
        }


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def evaluate_success(final_answer: str | None, task: Task) -> bool:
    """Verify a terminal answer against the task's reference.

    exact_match trims surrounding whitespace; numeric_match compares decimal
    values within 1e-9 relative tolerance (non-numeric text is simply wrong,
    not an error); contains looks for the reference as a substring after
    whitespace normalization.
    """
    if final_answer is None or not task.reference_answer:
        return False
    if task.verifier == "exact_match":
        return final_answer.strip() == task.reference_answer.strip()
    if task.verifier == "numeric_match":
        try:
            got = float(final_answer.strip())
            want = float(task.reference_answer.strip())
        except ValueError:
            return False
        return math.isclose(got, want, rel_tol=1e-9)
    return _normalize_ws(task.reference_answer) in _normalize_ws(final_answer)


def stratify_tasks(
    tasks: Iterable[Task], thresholds: tuple[float, float] = DEFAULT_STRATIFY_THRESHOLDS
) -> list[Task]:
    """Label tasks easy/medium/hard from their pass rate.

    easy when pass_rate >= easy_min, hard when pass_rate < hard_max,
    medium in between.
    """
    easy_min, hard_max = thresholds
    if not 0.0 <= hard_max < easy_min <= 1.0:
        raise ValueError(f"thresholds must satisfy 0 <= hard_max < easy_min <= 1: {thresholds}")
    labeled = []
    for task in tasks:
        rate = task.difficulty.pass_rate
        tier = "easy" if rate >= easy_min else "hard" if rate < hard_max else "medium"
        labeled.append(replace(task, difficulty=Difficulty(pass_rate=rate, tier=tier)))
    return labeled


def _router_completion_tokens(message: RouterMessage) -> int:
    if isinstance(message, (DirectAnswer, FinalSynthesis)):
        return count_tokens(message.text)
    total = 0
    for call in message.calls:
        if isinstance(call, CallModel):
            total += count_tokens(call.payload)
            if call.system_prompt_override:
                total += count_tokens(call.system_prompt_override)
    return total


class EpisodeMachine:
    """Stepwise episode engine: observation() -> step(decision) -> ... -> result."""

    def __init__(self, task: Task, config: RunConfig, backend: Backend | None = None, clock=None):
        self.task = task
        self.config = config
        self.backend = backend if backend is not None else PoolBackend(seed=config.seed)
        episode_id = f"ep-{stable_hash64('episode', task.id, config.seed):016x}"
        self.state = EpisodeState(episode_id=episode_id, task=task, catalog=config.catalog)
        self._catalog_text = render_catalog_prompt(config.catalog)
        self._orchestrator = Orchestrator(
            self.backend, config.catalog, config.cost_config, config.limits, clock=clock
        )
        self._responses: dict[str, str] = {}  # final-attempt call id -> response text
        self._steps_taken = 0
        self._result: EpisodeResult | None = None

    @property
    def done(self) -> bool:
        return self.state.status != "running"

    @property
    def after_tool_calls(self) -> bool:
        return bool(self._responses)

    def observation(self) -> Observation:
        return Observation(
            task_prompt=self.task.prompt,
            catalog_text=self._catalog_text,
            models=self.state.catalog.model_names,
            transcript=tuple(self.state.history),
            remaining_turns=self.config.limits.max_turns - self._steps_taken,
        )

    # -- terminal transitions -------------------------------------------------

    def _finish(self, status: str, final_answer: str | None, reason: str | None = None) -> None:
        state = self.state
        state.status = status
        state.failure_reason = reason
        state.final_answer = final_answer
        success = False if status == "failed" else evaluate_success(final_answer, self.task)
        total = state.accumulated_cost + state.router_cost
        normalized = normalize_cost(total, self.config.cost_config.per_turn_cap)
        self._result = EpisodeResult(
            episode_id=state.episode_id,
            task_id=self.task.id,
            status=status,
            failure_reason=reason,
            final_answer=final_answer,
            success=success,
            provider_cost=state.accumulated_cost,
            router_cost=state.router_cost,
            cost=total,
            normalized_cost=normalized,
            reward=compute_reward(
                Outcome(success=success, normalized_cost=normalized), self.config.reward_params
            ),
            records=tuple(state.records),
        )

    def fail(self, reason: str) -> None:
        if self.done:
            raise EpisodeFinishedError(self.state.episode_id)
        self._finish("failed", None, reason)

    # -- the step function ----------------------------------------------------

    def step(self, message: RouterMessage) -> bool:
        """Apply one router decision; returns True when the episode ended."""
        if self.done:
            raise EpisodeFinishedError(self.state.episode_id)
        self._steps_taken += 1
        self._charge_router(message)
        if isinstance(message, (DirectAnswer, FinalSynthesis)):
            mode = "done_synthesized" if self._responses else "done_direct"
            self.state.history.append(serialize_router_message(message))
            self._finish(mode, message.text)
            return True
        if not isinstance(message, ToolCalls):
            self.fail("protocol-error")
            return True
        violations = validate_calls(
            message.calls,
            model_names=self.state.catalog.model_names,
            prior_call_ids=self._responses.keys(),
            fan_out_cap=self.config.limits.fan_out_cap,
        )
        if violations:
            self.fail("protocol-error")
            return True
        first = message.calls[0]
        if isinstance(first, SelectResponse):
            self.state.history.append(serialize_router_message(message))
            self._finish("done_selected", self._responses[first.source_call_id])
            return True
        return self._dispatch(message)

    def _charge_router(self, message: RouterMessage) -> None:
        prices = self.config.cost_config.router_self_prices
        if prices.input_price == 0 and prices.output_price == 0 and prices.fixed_overhead == 0:
            return
        usage = TokenUsage(0, _router_completion_tokens(message))
        self.state.router_cost += call_cost(usage, prices)

    def _dispatch(self, message: ToolCalls) -> bool:
        try:
            turn = self._orchestrator.dispatch_turn(
                list(message.calls),
                episode_id=self.state.episode_id,
                turn_index=self.state.turn_index,
                task=self.task,
                accumulated_cost=self.state.accumulated_cost + self.state.router_cost,
            )
        except BudgetExceededError:
            self.fail("budget-exceeded")
            return True
        self.state.records.extend(turn.records)
        self.state.accumulated_cost += turn.cost
        self.state.history.append(serialize_router_message(message))
        for record, response in turn.results:
            text = response.text if response is not None else ""
            hint = response.correctness_hint if response is not None else None
            self._responses[record.call_id] = text
            self.state.history.append(serialize_tool_result(record, text, hint))
        self.state.turn_index += 1
        if self._steps_taken >= self.config.limits.max_turns:
            self.fail("turn-exhausted")
            return True
        return False

    def result(self) -> EpisodeResult:
        if self._result is None:
            raise RuntimeError("episode still running")
        return self._result


def run_episode(
    task: Task, policy, config: RunConfig, backend: Backend | None = None, clock=None
) -> EpisodeResult:
    """Drive one episode with a local policy object.

    A policy that emits an invalid message (or whose remote transport fails)
    loses the episode: status failed, success False, zero reward, but any
    cost already spent stays on the ledger.
    """
    machine = EpisodeMachine(task, config, backend=backend, clock=clock)
    while not machine.done:
        try:
            decision = policy.observe(machine.observation())
        except TransportError:
            machine.fail("transport-error")
            break
        except ProtocolError:
            machine.fail("protocol-error")
            break
        if not isinstance(decision, (DirectAnswer, FinalSynthesis, ToolCalls)):
            machine.fail("protocol-error")
            break
        machine.step(decision)
    result = machine.result()
    feedback = getattr(policy, "feedback", None)
    if feedback is not None:
        feedback(result)
    return result


# -- task files ----------------------------------------------------------------


def task_from_dict(doc: dict) -> Task:
    difficulty = doc.get("difficulty") or {}
    return Task(
        id=str(doc["id"]),
        prompt=doc["prompt"],
        reference_answer=doc.get("reference_answer", ""),
        verifier=doc.get("verifier", "exact_match"),
        difficulty=Difficulty(
            pass_rate=float(difficulty.get("pass_rate", 0.5)),
            tier=difficulty.get("tier", "medium"),
        ),
    )


def task_to_dict(task: Task) -> dict:
    return {
        "id": task.id,
        "prompt": task.prompt,
        "reference_answer": task.reference_answer,
        "verifier": task.verifier,
        "difficulty": {"pass_rate": task.difficulty.pass_rate, "tier": task.difficulty.tier},
    }


def load_tasks_jsonl(path: str | Path) -> list[Task]:
    tasks = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            tasks.append(task_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad task record: {exc}") from exc
    return tasks
