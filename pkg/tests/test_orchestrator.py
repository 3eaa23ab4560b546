import random
import threading
import time

import pytest

from xrouter.ledger import CostConfig
from xrouter.orchestrator import (
    BudgetExceededError,
    EpisodeLimits,
    Orchestrator,
    RetryDecision,
    VirtualClock,
    retry_policy,
)
from xrouter.protocol import CallModel
from xrouter.providers import SimulatedBackend

from conftest import FlakyBackend, make_task


class TestRetryPolicy:
    def test_success_never_retried(self):
        assert retry_policy("ok", 0, EpisodeLimits()) == RetryDecision(retry=False)

    def test_timeout_retries_with_debounce(self):
        decision = retry_policy("timeout", 0, EpisodeLimits(retry_max=2, retry_debounce_ms=100))
        assert decision.retry and decision.wait_ms >= 100

    def test_gives_up_at_retry_max(self):
        assert not retry_policy("timeout", 2, EpisodeLimits(retry_max=2)).retry

    def test_elapsed_reduces_wait(self):
        decision = retry_policy(
            "timeout",
            0,
            EpisodeLimits(retry_debounce_ms=250),
            elapsed_since_attempt_ms=200,
        )
        assert decision.retry and decision.wait_ms == pytest.approx(50)

    def test_budget_guard_blocks_retry(self):
        limits = EpisodeLimits(retry_max=5, episode_budget=1000)
        decision = retry_policy("timeout", 0, limits, spent=900, next_attempt_cost=200)
        assert not decision.retry


def build(catalog, backend, limits=None):
    return Orchestrator(backend, catalog, CostConfig(), limits or EpisodeLimits())


class TestDispatch:
    def test_single_ok_call(self, catalog):
        orchestrator = build(catalog, SimulatedBackend(seed=1))
        turn = orchestrator.dispatch_turn(
            [CallModel("alpha", "hello world")],
            episode_id="ep-x",
            turn_index=0,
            task=make_task(),
            accumulated_cost=0,
        )
        assert len(turn.records) == 1
        record = turn.records[0]
        assert record.outcome == "ok" and record.retry_count == 0
        assert turn.cost == record.cost > 0

    def test_two_timeouts_then_success(self, catalog):
        backend = FlakyBackend(SimulatedBackend(seed=1), failures=2, kind="timeout")
        orchestrator = build(catalog, backend, EpisodeLimits(retry_max=2, retry_debounce_ms=100))
        turn = orchestrator.dispatch_turn(
            [CallModel("alpha", "hello")],
            episode_id="ep-x",
            turn_index=0,
            task=make_task(),
            accumulated_cost=0,
        )
        assert [r.outcome for r in turn.records] == ["timeout", "timeout", "ok"]
        assert [r.retry_count for r in turn.records] == [0, 1, 2]
        assert turn.cost == sum(r.cost for r in turn.records)
        # debounce advanced the virtual clock, not the wall clock
        assert orchestrator.clock.now_ms() >= 200

    def test_all_attempts_fail(self, catalog):
        backend = FlakyBackend(SimulatedBackend(seed=1), failures=99, kind="provider_error")
        orchestrator = build(catalog, backend, EpisodeLimits(retry_max=1))
        turn = orchestrator.dispatch_turn(
            [CallModel("alpha", "hello")],
            episode_id="ep-x",
            turn_index=0,
            task=make_task(),
            accumulated_cost=0,
        )
        assert [r.outcome for r in turn.records] == ["provider_error", "provider_error"]
        final_record, final_response = turn.results[0]
        assert final_response is None
        # failed attempts still bill prompt tokens
        assert all(r.cost > 0 and r.usage.completion_tokens == 0 for r in turn.records)

    def test_budget_exceeded_rejects_turn(self, catalog):
        limits = EpisodeLimits(episode_budget=1000)
        orchestrator = build(catalog, SimulatedBackend(seed=1), limits)
        with pytest.raises(BudgetExceededError):
            orchestrator.dispatch_turn(
                [CallModel("alpha", "hello")],
                episode_id="ep-x",
                turn_index=0,
                task=make_task(),
                accumulated_cost=1000,
            )

    def test_fan_out_cap_enforced(self, catalog):
        orchestrator = build(catalog, SimulatedBackend(seed=1), EpisodeLimits(fan_out_cap=1))
        with pytest.raises(ValueError, match="fan_out_cap"):
            orchestrator.dispatch_turn(
                [CallModel("alpha", "a"), CallModel("beta", "b")],
                episode_id="ep-x",
                turn_index=0,
                task=make_task(),
                accumulated_cost=0,
            )

    def test_result_order_matches_call_order_under_latency_noise(self, catalog):
        class JitteryBackend:
            def __init__(self, inner):
                self.inner = inner
                self.rng = random.Random()

            def invoke(self, req, *, descriptor, task, attempt):
                time.sleep(self.rng.uniform(0, 0.01))
                return self.inner.invoke(req, descriptor=descriptor, task=task, attempt=attempt)

        orchestrator = build(
            catalog, JitteryBackend(SimulatedBackend(seed=1)), EpisodeLimits(fan_out_cap=3)
        )
        names = ["gamma", "alpha", "beta"]
        for trial in range(5):
            turn = orchestrator.dispatch_turn(
                [CallModel(n, "payload") for n in names],
                episode_id=f"ep-{trial}",
                turn_index=0,
                task=make_task(),
                accumulated_cost=0,
            )
            assert [record.model_name for record, _ in turn.results] == names

    def test_one_record_per_invocation_with_cache(self, catalog, tmp_path):
        from xrouter.providers import CacheStore, CachingBackend

        backend = CachingBackend(SimulatedBackend(seed=1), CacheStore(tmp_path / "c.jsonl"))
        orchestrator = build(catalog, backend)
        kwargs = dict(episode_id="ep-x", task=make_task(), accumulated_cost=0)
        first = orchestrator.dispatch_turn([CallModel("alpha", "q")], turn_index=0, **kwargs)
        second = orchestrator.dispatch_turn([CallModel("alpha", "q")], turn_index=1, **kwargs)
        assert len(first.records) == len(second.records) == 1
        assert not first.records[0].cached and second.records[0].cached
        assert second.records[0].cost == 0


def test_virtual_clock_is_thread_safe():
    clock = VirtualClock()
    threads = [threading.Thread(target=lambda: [clock.sleep(1) for _ in range(1000)]) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert clock.now_ms() == 4000
