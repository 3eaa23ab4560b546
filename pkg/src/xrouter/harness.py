"""Batch evaluation: per-task episodes, aggregate metrics, frontier analysis.

Aggregation is a deterministic fold in task order (never completion order),
sums stay in exact integer nano-USD, and averages are taken in exact
rationals before rendering, so two runs with the same config and seed
produce byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .episode import EpisodeResult, RunConfig, Task, run_episode
from .ledger import Money, ledger_jsonl
from .money import round_half_up, usd_string
from .providers import Backend, PoolBackend

STRATEGIES = ("direct", "synthesized", "selected", "failed")

_STATUS_TO_STRATEGY = {
    "done_direct": "direct",
    "done_synthesized": "synthesized",
    "done_selected": "selected",
    "failed": "failed",
}


@dataclass(frozen=True)
class ParetoPoint:
    label: str
    accuracy: float
    cost: float  # USD

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy outside [0,1]: {self.accuracy}")
        if self.cost < 0:
            raise ValueError(f"negative cost: {self.cost}")


def pareto_frontier(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Return exactly the non-dominated points, preserving input order.

    q dominates p iff q.accuracy >= p.accuracy and q.cost <= p.cost with at
    least one strict; ties (duplicated points) are all retained. Implemented
    as a cost-sorted sweep; tests pin it against the quadratic filter.
    """
    if not points:
        return []
    order = sorted(range(len(points)), key=lambda i: (points[i].cost, -points[i].accuracy))
    keep: set[int] = set()
    best_lower = float("-inf")  # max accuracy among strictly cheaper points
    i = 0
    while i < len(order):
        j = i
        cost = points[order[i]].cost
        while j < len(order) and points[order[j]].cost == cost:
            j += 1
        group = order[i:j]
        group_max = max(points[g].accuracy for g in group)
        if group_max > best_lower:
            keep.update(g for g in group if points[g].accuracy == group_max)
        best_lower = max(best_lower, group_max)
        i = j
    return [p for idx, p in enumerate(points) if idx in keep]


def cost_utility(accuracy: float, avg_cost_usd: float) -> float | None:
    """Accuracy per dollar; None marks the undefined zero-cost case
    (reported as "inf" and excluded from rankings)."""
    if avg_cost_usd < 0:
        raise ValueError("avg_cost_usd must be >= 0")
    if avg_cost_usd == 0:
        return None
    return accuracy / avg_cost_usd


def _avg_usd_string(total_nano: Money, count: int) -> str:
    # exact rational average rendered half-up at 12 decimal places
    scaled = round_half_up(Fraction(total_nano * 10**3, count))
    return f"{scaled // 10**12}.{scaled % 10**12:012d}"


def distributions(results: Sequence[EpisodeResult]) -> tuple[dict[str, float], dict[str, int]]:
    """Strategy fractions by terminal status; offload counts by model.

    Every attempted invocation counts toward offload, including retries and
    cache hits, matching the ledger exactly.
    """
    n = len(results)
    strategy = {s: 0 for s in STRATEGIES}
    offload: dict[str, int] = {}
    for result in results:
        strategy[_STATUS_TO_STRATEGY[result.status]] += 1
        for record in result.records:
            offload[record.model_name] = offload.get(record.model_name, 0) + 1
    fractions = {s: (strategy[s] / n if n else 0.0) for s in STRATEGIES}
    return fractions, dict(sorted(offload.items()))


@dataclass
class EvalReport:
    policy_name: str
    params: dict
    seed: int
    catalog_version: int
    rows: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy_name,
            "params": self.params,
            "seed": self.seed,
            "catalog_version": self.catalog_version,
            "aggregates": self.aggregates,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            policy_name=doc["policy"],
            params=doc["params"],
            seed=doc["seed"],
            catalog_version=doc["catalog_version"],
            rows=doc["rows"],
            aggregates=doc["aggregates"],
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def _row(result: EpisodeResult) -> dict:
    by_model: dict[str, int] = {}
    for record in result.records:
        by_model[record.model_name] = by_model.get(record.model_name, 0) + 1
    return {
        "task_id": result.task_id,
        "status": result.status,
        "success": result.success,
        "cost_nano_usd": result.cost,
        "cost_usd": usd_string(result.cost),
        "reward": result.reward,
        "records": {"count": len(result.records), "by_model": dict(sorted(by_model.items()))},
    }


def run_eval(
    tasks: Sequence[Task],
    policy,
    config: RunConfig,
    *,
    policy_name: str = "policy",
    backend: Backend | None = None,
    workers: int = 1,
    ledger_path: str | Path | None = None,
) -> EvalReport:
    """One episode per task, aggregated exactly.

    Learning policies (those with a feedback hook) need workers=1; episode
    results are folded in task order either way. ledger_path, when given,
    receives every CallRecord of the run as JSONL, in task order.
    """
    if not tasks:
        raise ValueError("task list must be non-empty")
    if backend is None:
        backend = PoolBackend(seed=config.seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: run_episode(t, policy, config, backend), tasks))
    else:
        results = [run_episode(task, policy, config, backend) for task in tasks]
    if ledger_path is not None:
        Path(ledger_path).write_text(
            ledger_jsonl(record for result in results for record in result.records)
        )

    n = len(results)
    successes = sum(1 for r in results if r.success)
    total_cost = sum(r.cost for r in results)
    accuracy = successes / n
    avg_cost_usd = float(Fraction(total_cost, n * 10**9))
    utility = cost_utility(accuracy, avg_cost_usd)
    strategy, offload = distributions(results)
    aggregates = {
        "task_count": n,
        "accuracy": accuracy,
        "total_cost_nano_usd": total_cost,
        "avg_cost_nano_usd": str(Fraction(total_cost, n)),
        "avg_cost_usd": _avg_usd_string(total_cost, n),
        "cost_utility": "inf" if utility is None else utility,
        "strategy_distribution": strategy,
        "offload_distribution": offload,
    }
    return EvalReport(
        policy_name=policy_name,
        params=dict(
            k=config.reward_params.success_bonus_k,
            cost_penalty_lambda=config.reward_params.cost_penalty_lambda,
        ),
        seed=config.seed,
        catalog_version=config.catalog.version,
        rows=[_row(r) for r in results],
        aggregates=aggregates,
    )


def report_to_csv(report: EvalReport) -> str:
    """Summary row, a blank line, then the per-task table."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    agg = report.aggregates
    writer.writerow(
        ["policy", "seed", "task_count", "accuracy", "avg_cost_usd", "cost_utility"]
        + [f"strategy_{s}" for s in STRATEGIES]
    )
    writer.writerow(
        [
            report.policy_name,
            report.seed,
            agg["task_count"],
            agg["accuracy"],
            agg["avg_cost_usd"],
            agg["cost_utility"],
        ]
        + [agg["strategy_distribution"][s] for s in STRATEGIES]
    )
    writer.writerow([])
    writer.writerow(["task_id", "status", "success", "cost_usd", "reward", "record_count"])
    for row in report.rows:
        writer.writerow(
            [
                row["task_id"],
                row["status"],
                row["success"],
                row["cost_usd"],
                row["reward"],
                row["records"]["count"],
            ]
        )
    return buffer.getvalue()


def export_report(report: EvalReport, fmt: str, path: str | Path) -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(report.to_json())
    elif fmt == "csv":
        path.write_text(report_to_csv(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
