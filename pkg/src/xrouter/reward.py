"""Success-gated, cost-penalized reward.

The reward is success * (K - lambda * normalized_cost): a failed task earns
exactly zero no matter what it cost, and on success cheaper is better. The
same rule applies at turn and episode granularity. No floor is applied, so
the reward can go negative when lambda exceeds K at costs near the cap.
"""

from __future__ import annotations

from dataclasses import dataclass

# Named penalty presets; the strength values are configuration, not ground truth.
LAMBDA_PRESETS = {"lambda1": 0.25, "lambda2": 0.5, "lambda3": 1.0}


@dataclass(frozen=True)
class RewardParams:
    success_bonus_k: float = 1.0
    cost_penalty_lambda: float = 0.5

    def __post_init__(self) -> None:
        if self.success_bonus_k <= 0:
            raise ValueError("success bonus K must be > 0")
        if self.cost_penalty_lambda < 0:
            raise ValueError("cost penalty lambda must be >= 0")


@dataclass(frozen=True)
class Outcome:
    success: bool
    normalized_cost: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.normalized_cost <= 1.0:
            raise ValueError(f"normalized_cost outside [0,1]: {self.normalized_cost}")


def reward(outcome: Outcome, params: RewardParams) -> float:
    if not outcome.success:
        return 0.0
    return params.success_bonus_k - params.cost_penalty_lambda * outcome.normalized_cost


def expected_reward(
    accuracy: float, expected_normalized_cost: float, params: RewardParams
) -> float:
    """Closed-form expectation of the gated reward under independence.

    Used as the oracle when ranking candidate strategies: the argmax is
    invariant to scaling K and lambda by the same positive constant.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy outside [0,1]: {accuracy}")
    return accuracy * (
        params.success_bonus_k - params.cost_penalty_lambda * expected_normalized_cost
    )
