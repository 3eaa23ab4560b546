import pytest
from hypothesis import given, strategies as st

from xrouter.catalog import PriceSchedule
from xrouter.ledger import (
    CallRecord,
    CostConfig,
    TokenUsage,
    aggregate,
    audit_check,
    call_cost,
    ledger_jsonl,
    normalize_cost,
    read_ledger_jsonl,
)


def record(call_id="c0", episode="ep1", turn=0, cost=0, cached=False, outcome="ok", retry=0):
    return CallRecord(
        call_id=call_id,
        episode_id=episode,
        turn_index=turn,
        model_name="m",
        request_digest="d" * 8,
        usage=TokenUsage(10, 20),
        cost=cost,
        latency_ms=5,
        cached=cached,
        outcome=outcome,
        retry_count=retry,
    )


class TestCallCost:
    def test_prompt_only_million_tokens(self):
        # $1.25/M over a million prompt tokens is exactly $1.25
        cost = call_cost(TokenUsage(1_000_000, 0), PriceSchedule(1250, 10_000, 0))
        assert cost == 1_250_000_000

    def test_overhead_only(self):
        assert call_cost(TokenUsage(0, 0), PriceSchedule(0, 0, 500)) == 500

    def test_mixed(self):
        cost = call_cost(TokenUsage(1000, 500), PriceSchedule(1250, 10_000, 0))
        assert cost == 1_250_000 + 5_000_000


class TestNormalize:
    def test_half(self):
        assert normalize_cost(50_000_000, 100_000_000) == 0.5

    def test_clamped_above_cap(self):
        assert normalize_cost(250_000_000, 100_000_000) == 1.0

    def test_zero(self):
        assert normalize_cost(0, 100_000_000) == 0.0

    def test_zero_cap_rejected(self):
        with pytest.raises(ValueError):
            normalize_cost(1, 0)

    @given(st.integers(0, 10**12), st.integers(1, 10**12))
    def test_range_and_exactness(self, cost, cap):
        value = normalize_cost(cost, cap)
        assert 0.0 <= value <= 1.0
        if cost < cap:
            assert value == cost / cap

    def test_monotone(self):
        cap = 1000
        values = [normalize_cost(c, cap) for c in range(0, 3000, 17)]
        assert values == sorted(values)


class TestAggregate:
    def test_empty(self):
        assert aggregate([]) == 0

    def test_episode_sum(self):
        records = [record("a", cost=3), record("b", cost=5), record("c", cost=7)]
        assert aggregate(records) == 15

    def test_turn_filter(self):
        records = [
            record("a", turn=0, cost=2),
            record("b", turn=0, cost=3),
            record("c", turn=1, cost=9),
        ]
        assert aggregate(records, turn=0) == 5

    def test_mixed_episodes_rejected(self):
        with pytest.raises(ValueError):
            aggregate([record("a", episode="e1"), record("b", episode="e2")])


class TestAudit:
    def test_consistent_ledger_ok(self):
        records = [record("a", cost=3), record("b", cost=5)]
        verdict = audit_check(records, 8)
        assert verdict.ok and not verdict.violations

    def test_mismatch_enumerated(self):
        records = [record("a", cost=3)]
        verdict = audit_check(records, 4)
        assert not verdict.ok
        assert verdict.violations[0]["code"] == "cost-mismatch"
        assert verdict.violations[0]["expected"] == 3
        assert verdict.violations[0]["actual"] == 4

    def test_cached_nonzero_cost(self):
        verdict = audit_check([record("a", cost=7, cached=True)], 7)
        codes = [v["code"] for v in verdict.violations]
        assert "cached-nonzero-cost" in codes


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 10**9)), max_size=40))
def test_additivity_property(costs):
    records = [record(f"c{i}", turn=t, cost=c) for i, (t, c) in enumerate(costs)]
    episode_total = aggregate(records)
    by_turns = sum(aggregate(records, turn=t) for t in {t for t, _ in costs})
    by_records = sum(r.cost for r in records)
    assert episode_total == by_turns == by_records


def test_jsonl_roundtrip():
    records = [record("a", cost=3), record("b", cost=0, cached=True), record("c", outcome="timeout")]
    text = ledger_jsonl(records)
    assert len(text.splitlines()) == 3
    assert '"usd":"0.000000003"' in text
    assert read_ledger_jsonl(text) == records


def test_cost_config_requires_positive_cap():
    with pytest.raises(ValueError):
        CostConfig(per_turn_cap=0)
