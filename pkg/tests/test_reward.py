import random

import pytest
from hypothesis import given, strategies as st

from xrouter.episode import RunConfig, run_episode
from xrouter.catalog import Catalog
from xrouter.policies import single_model_policy
from xrouter.reward import LAMBDA_PRESETS, Outcome, RewardParams, expected_reward, reward

from conftest import make_model, make_task


class TestRewardExamples:
    def test_failure_earns_zero_regardless_of_cost(self):
        params = RewardParams(success_bonus_k=1.0, cost_penalty_lambda=1.0)
        assert reward(Outcome(success=False, normalized_cost=0.73), params) == 0.0

    def test_zero_cost_success_earns_k(self):
        params = RewardParams(success_bonus_k=1.0, cost_penalty_lambda=1.0)
        assert reward(Outcome(success=True, normalized_cost=0.0), params) == 1.0

    def test_direct_formula(self):
        params = RewardParams(success_bonus_k=1.0, cost_penalty_lambda=0.5)
        assert reward(Outcome(success=True, normalized_cost=0.5), params) == 0.75

    def test_negative_allowed_when_lambda_exceeds_k(self):
        params = RewardParams(success_bonus_k=1.0, cost_penalty_lambda=2.0)
        assert reward(Outcome(success=True, normalized_cost=1.0), params) == -1.0


@given(
    success=st.booleans(),
    cost=st.floats(0.0, 1.0),
    k=st.floats(0.01, 10.0),
    lam=st.floats(0.0, 10.0),
)
def test_gating_and_bounds_property(success, cost, k, lam):
    params = RewardParams(success_bonus_k=k, cost_penalty_lambda=lam)
    value = reward(Outcome(success=success, normalized_cost=cost), params)
    if not success:
        assert value == 0.0
    else:
        assert k - lam <= value <= k


def test_cost_monotonicity():
    params = RewardParams(success_bonus_k=1.0, cost_penalty_lambda=0.7)
    costs = [i / 50 for i in range(51)]
    values = [reward(Outcome(True, c), params) for c in costs]
    assert all(a > b for a, b in zip(values, values[1:]))


class TestExpectedReward:
    def test_examples(self):
        params = RewardParams(1.0, 1.0)
        assert expected_reward(0.9, 0.5, params) == pytest.approx(0.45)
        assert expected_reward(0.6, 0.1, params) == pytest.approx(0.54)
        assert expected_reward(0.0, 0.9, params) == 0.0

    def test_monte_carlo_cross_check(self):
        # one arm with accuracy 0.9 and cost pinned at half the cap: the
        # episode loop must realize the closed-form 0.45 mean reward
        model = make_model(
            "arm",
            accuracy={"easy": 0.9, "medium": 0.9, "hard": 0.9},
            in_price=0,
            out_price=50_000,
            out_tokens=(1000, 1000),
        )
        config = RunConfig(
            catalog=Catalog(version=1, models=(model,)),
            reward_params=RewardParams(1.0, 1.0),
            seed=123,
        )
        policy = single_model_policy("arm")
        n = 2000
        total = 0.0
        for i in range(n):
            result = run_episode(make_task(f"mc-{i}", answer="42"), policy, config)
            assert result.normalized_cost == pytest.approx(0.5)
            total += result.reward
        # sigma = sqrt(0.9*0.1)*0.5/sqrt(n) ~= 0.0034
        assert total / n == pytest.approx(0.45, abs=0.011)


def test_argmax_invariance_under_param_scaling():
    rng = random.Random(4)
    for _ in range(50):
        arms = [(rng.random(), rng.random()) for _ in range(5)]
        base = RewardParams(1.0, 0.8)
        for scale in (0.5, 2.0, 7.5):
            scaled = RewardParams(base.success_bonus_k * scale, base.cost_penalty_lambda * scale)
            argmax_base = max(range(5), key=lambda i: expected_reward(*arms[i], base))
            argmax_scaled = max(range(5), key=lambda i: expected_reward(*arms[i], scaled))
            assert argmax_base == argmax_scaled


def test_lambda_presets():
    assert LAMBDA_PRESETS == {"lambda1": 0.25, "lambda2": 0.5, "lambda3": 1.0}


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        RewardParams(success_bonus_k=0.0)
    with pytest.raises(ValueError):
        RewardParams(cost_penalty_lambda=-0.1)
    with pytest.raises(ValueError):
        Outcome(success=True, normalized_cost=1.5)
