"""Bundled fixtures: transcribed benchmark tables, a default simulated
catalog, and a generator for synthetic easy tasks.

The benchmark tables are transcribed external results used only to
cross-check metric math (cost utility, frontier membership); this code never
claims to reproduce them.
"""

from __future__ import annotations

import json
from importlib import resources

from .catalog import Catalog, load_catalog
from .episode import Difficulty, Task
from .harness import ParetoPoint
from .rng import int_in_range


def benchmark_tables() -> dict:
    blob = resources.files("xrouter").joinpath("data/benchmark_tables.json").read_text()
    return json.loads(blob)


def benchmark_points(table: str, benchmark: str, models: list[str]) -> list[ParetoPoint]:
    """Accuracy/cost points for the named models on one benchmark column.

    Only meaningful for columns whose score is a fraction in [0, 1]."""
    rows = benchmark_tables()[table]["rows"]
    points = []
    for model in models:
        cell = rows[model][benchmark]
        points.append(ParetoPoint(label=model, accuracy=cell["score"], cost=cell["cost_usd"]))
    return points


DEFAULT_CATALOG_DOC = {
    "models": [
        {
            "name": "sim-premium",
            "provider_kind": "simulated",
            "tier": "premium",
            "description": "Strong general model; expensive but reliable on hard problems.",
            "price_in_usd_per_mtok": "1.25",
            "price_out_usd_per_mtok": "10",
            "overhead_usd": "0",
            "max_context": 400000,
            "capability": {
                "accuracy": {"easy": 0.99, "medium": 0.95, "hard": 0.85},
                "out_tokens": [200, 800],
                "latency_ms": 2400,
            },
        },
        {
            "name": "sim-mid",
            "provider_kind": "simulated",
            "tier": "mid",
            "description": "Balanced model; good quality at a fraction of premium pricing.",
            "price_in_usd_per_mtok": "0.25",
            "price_out_usd_per_mtok": "2",
            "overhead_usd": "0",
            "max_context": 400000,
            "capability": {
                "accuracy": {"easy": 0.97, "medium": 0.85, "hard": 0.55},
                "out_tokens": [150, 600],
                "latency_ms": 1200,
            },
        },
        {
            "name": "sim-budget",
            "provider_kind": "simulated",
            "tier": "budget",
            "description": "Small fast model; cheap, fine for easy queries only.",
            "price_in_usd_per_mtok": "0.05",
            "price_out_usd_per_mtok": "0.4",
            "overhead_usd": "0",
            "max_context": 128000,
            "capability": {
                "accuracy": {"easy": 0.9, "medium": 0.6, "hard": 0.2},
                "out_tokens": [80, 400],
                "latency_ms": 500,
            },
        },
    ]
}


def default_catalog() -> Catalog:
    return load_catalog(DEFAULT_CATALOG_DOC)


_EASY_TEMPLATES = [
    ("Say hello back to me.", "hello", "contains"),
    ("Repeat the word {word} exactly once.", "{word}", "contains"),
    ("What is {a} plus {b}?", "{sum}", "contains"),
    ("What is {a} times {b}?", "{product}", "contains"),
    ("Spell the word {word} in lowercase.", "{word}", "contains"),
    ("Answer with just the number: {a} + {b}", "{sum}", "numeric_match"),
]

_WORDS = ("lantern", "orbit", "pepper", "quartz", "meadow", "violet", "harbor", "ember")


def synthetic_easy_tasks(n: int, seed: int = 0) -> list[Task]:
    """Deterministic chit-chat / small-lookup style tasks, all tier easy.

    These pad a workload with queries a router should answer on its own (or
    send to the cheapest arm) rather than escalating.
    """
    tasks = []
    for i in range(n):
        template, answer, verifier = _EASY_TEMPLATES[
            int_in_range(0, len(_EASY_TEMPLATES) - 1, "easy-template", seed, i)
        ]
        a = int_in_range(2, 49, "easy-a", seed, i)
        b = int_in_range(2, 49, "easy-b", seed, i)
        word = _WORDS[int_in_range(0, len(_WORDS) - 1, "easy-word", seed, i)]
        fills = {"a": a, "b": b, "sum": a + b, "product": a * b, "word": word}
        tasks.append(
            Task(
                id=f"easy-{seed}-{i:04d}",
                prompt=template.format(**fills),
                reference_answer=answer.format(**fills),
                verifier=verifier,
                difficulty=Difficulty(pass_rate=0.95, tier="easy"),
            )
        )
    return tasks
