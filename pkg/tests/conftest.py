from __future__ import annotations

import pytest


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = {}
    for status, word in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                name = nodeid.split("::")[-1]
                if word == "FAIL" or name not in lines:
                    lines[name] = word
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(f"{lines[name]}  {name}")

from xrouter.catalog import Catalog, CapabilityProfile, ModelDescriptor, PriceSchedule
from xrouter.episode import Difficulty, RunConfig, Task
from xrouter.providers import ProviderFailure


def make_model(
    name: str,
    tier: str = "mid",
    accuracy: dict | None = None,
    in_price: int = 1250,
    out_price: int = 10_000,
    overhead: int = 0,
    out_tokens: tuple[int, int] = (100, 400),
    latency_ms: int = 100,
) -> ModelDescriptor:
    return ModelDescriptor(
        name=name,
        provider_kind="simulated",
        tier=tier,
        description=f"a {tier}-tier test model",
        prices=PriceSchedule(in_price, out_price, overhead),
        max_context=128000,
        capability=CapabilityProfile(
            accuracy_by_tier=accuracy or {"easy": 0.9, "medium": 0.6, "hard": 0.3},
            output_tokens_min=out_tokens[0],
            output_tokens_max=out_tokens[1],
            latency_ms_nominal=latency_ms,
        ),
    )


def make_task(
    task_id: str = "t1",
    prompt: str = "What is 2+2?",
    answer: str = "4",
    verifier: str = "exact_match",
    tier: str = "medium",
    pass_rate: float = 0.5,
) -> Task:
    return Task(
        id=task_id,
        prompt=prompt,
        reference_answer=answer,
        verifier=verifier,
        difficulty=Difficulty(pass_rate=pass_rate, tier=tier),
    )


@pytest.fixture
def catalog() -> Catalog:
    return Catalog(
        version=1,
        models=(
            make_model("alpha", tier="premium", accuracy={"easy": 1.0, "medium": 0.95, "hard": 0.8}),
            make_model("beta", tier="mid", accuracy={"easy": 0.95, "medium": 0.7, "hard": 0.4}),
            make_model(
                "gamma",
                tier="budget",
                accuracy={"easy": 0.9, "medium": 0.5, "hard": 0.1},
                in_price=50,
                out_price=400,
            ),
        ),
    )


@pytest.fixture
def run_config(catalog) -> RunConfig:
    return RunConfig(catalog=catalog, seed=7)


class FlakyBackend:
    """Wraps a backend, failing the first `failures` attempts per call site."""

    def __init__(self, inner, failures: int = 0, kind: str = "timeout"):
        self.inner = inner
        self.failures = failures
        self.kind = kind
        self.attempts: dict[tuple, int] = {}

    def invoke(self, req, *, descriptor, task, attempt):
        if attempt < self.failures:
            raise ProviderFailure(self.kind, f"injected failure #{attempt}")
        return self.inner.invoke(req, descriptor=descriptor, task=task, attempt=attempt)
