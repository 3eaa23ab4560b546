"""Baseline router policies exercising the full action space.

A policy is anything with observe(Observation) -> RouterMessage; learning
policies also expose feedback(EpisodeResult). All shipped policies derive
their per-episode stage from the transcript rather than internal flags, so
one policy object can serve many episodes (and the external bridge sees the
same information a remote learner would).
"""

from __future__ import annotations

import random
from typing import Callable, Protocol, Sequence, runtime_checkable

from .episode import EpisodeResult, Observation, TransportError
from .protocol import (
    CallModel,
    DirectAnswer,
    RouterMessage,
    SelectResponse,
    ToolCalls,
    parse_router_message,
    serialize_router_message,
)


@runtime_checkable
class Policy(Protocol):
    def observe(self, observation: Observation) -> RouterMessage: ...


def _tool_messages(observation: Observation) -> list[dict]:
    return [m for m in observation.transcript if m.get("role") == "tool"]


def single_model_policy(model_name: str) -> "SingleModelPolicy":
    return SingleModelPolicy(model_name)


class SingleModelPolicy:
    """Always offload to one fixed model, then adopt its response."""

    def __init__(self, model_name: str):
        self.model_name = model_name

    def observe(self, observation: Observation) -> RouterMessage:
        tools = _tool_messages(observation)
        if not tools:
            return ToolCalls((CallModel(self.model_name, observation.task_prompt),))
        return ToolCalls((SelectResponse(tools[0]["tool_call_id"]),))


AcceptRule = Callable[[dict], bool]


def _accept_on_hint(metadata: dict) -> bool:
    return metadata.get("correctness_hint") is True


def cascade_policy(order: Sequence[str], accept_rule: AcceptRule | None = None) -> "CascadePolicy":
    return CascadePolicy(order, accept_rule)


class CascadePolicy:
    """Escalate cheapest-first until a response is accepted.

    The default accept rule trusts the simulated/cached correctness hint;
    against pools without a hint it degenerates to accepting the last
    response in the chain. Order length must leave one turn for the select.
    """

    def __init__(self, order: Sequence[str], accept_rule: AcceptRule | None = None):
        if not order:
            raise ValueError("cascade order must be non-empty")
        self.order = list(order)
        self.accept_rule = accept_rule or _accept_on_hint

    def observe(self, observation: Observation) -> RouterMessage:
        tools = _tool_messages(observation)
        if not tools:
            return ToolCalls((CallModel(self.order[0], observation.task_prompt),))
        last = tools[-1]
        tried = len(tools)
        exhausted = tried >= len(self.order) or observation.remaining_turns <= 1
        if exhausted or self.accept_rule(last.get("metadata", {})):
            return ToolCalls((SelectResponse(last["tool_call_id"]),))
        return ToolCalls((CallModel(self.order[tried], observation.task_prompt),))


EpsilonSchedule = Callable[[int], float]


def epsilon_greedy_policy(
    epsilon: float | EpsilonSchedule, seed: int = 0
) -> "EpsilonGreedyPolicy":
    return EpsilonGreedyPolicy(epsilon, seed)


class EpsilonGreedyPolicy:
    """Bandit over the catalog arms, learning at episode granularity.

    Each episode: pick an arm (explore with probability eps(t), otherwise the
    best empirical mean reward), call it once, adopt its response. Ties on
    mean reward break toward the lower observed mean cost, then lexically.
    """

    def __init__(self, epsilon: float | EpsilonSchedule, seed: int = 0):
        self._epsilon = epsilon if callable(epsilon) else (lambda t: float(epsilon))
        self._rng = random.Random(seed)
        self._episodes = 0
        self._stats: dict[str, list] = {}  # arm -> [n, reward_sum, cost_sum]
        self._current_arm: str | None = None

    def _mean_reward(self, arm: str) -> float:
        n, reward_sum, _ = self._stats.get(arm, (0, 0.0, 0))
        return reward_sum / n if n else 0.0

    def _mean_cost(self, arm: str) -> float:
        n, _, cost_sum = self._stats.get(arm, (0, 0.0, 0))
        return cost_sum / n if n else 0.0

    def _pick(self, arms: Sequence[str]) -> str:
        self._episodes += 1
        if self._rng.random() < self._epsilon(self._episodes):
            return arms[self._rng.randrange(len(arms))]
        return min(arms, key=lambda a: (-self._mean_reward(a), self._mean_cost(a), a))

    def observe(self, observation: Observation) -> RouterMessage:
        tools = _tool_messages(observation)
        if not tools:
            self._current_arm = self._pick(observation.models)
            return ToolCalls((CallModel(self._current_arm, observation.task_prompt),))
        return ToolCalls((SelectResponse(tools[-1]["tool_call_id"]),))

    def feedback(self, result: EpisodeResult) -> None:
        if self._current_arm is None:
            return
        stats = self._stats.setdefault(self._current_arm, [0, 0.0, 0])
        stats[0] += 1
        stats[1] += result.reward
        stats[2] += result.cost

    def selection_counts(self) -> dict[str, int]:
        return {arm: stats[0] for arm, stats in self._stats.items()}


AnswerSource = Callable[[Observation], str]


def direct_policy(source: str | AnswerSource) -> "DirectPolicy":
    return DirectPolicy(source)


class DirectPolicy:
    """Answer every task directly, never touching a downstream model."""

    def __init__(self, source: str | AnswerSource):
        self._source = source if callable(source) else (lambda _obs: str(source))

    def observe(self, observation: Observation) -> RouterMessage:
        return DirectAnswer(self._source(observation))


class DecisionTransport(Protocol):
    def decide(self, observation: dict) -> dict: ...


def external_policy(transport: DecisionTransport) -> "ExternalPolicy":
    return ExternalPolicy(transport)


class ExternalPolicy:
    """Forwards observations to a remote decision source verbatim.

    Transport exceptions fail the episode as a transport error; a remote
    message that does not parse fails it as a protocol error.
    """

    def __init__(self, transport: DecisionTransport):
        self.transport = transport

    def observe(self, observation: Observation) -> RouterMessage:
        try:
            wire = self.transport.decide(observation.to_dict())
        except TransportError:
            raise
        except Exception as exc:
            raise TransportError(f"decision transport failed: {exc}") from exc
        after_tools = any(m.get("role") == "tool" for m in observation.transcript)
        return parse_router_message(wire, after_tool_calls=after_tools)


class LoopbackTransport:
    """In-process transport wrapping a local policy, for equivalence tests."""

    def __init__(self, policy: Policy):
        self.policy = policy

    def decide(self, observation: dict) -> dict:
        message = self.policy.observe(Observation.from_dict(observation))
        return serialize_router_message(message)
