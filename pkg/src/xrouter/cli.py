"""Command line: serve the gateway, run batch evals, convert reports,
perturb catalogs."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .catalog import catalog_to_document, load_catalog, perturb_costs
from .config import load_app_config
from .episode import RunConfig, load_tasks_jsonl
from .harness import EvalReport, export_report, run_eval
from .reward import RewardParams


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Cost-aware LLM routing engine."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default=None, help="Override the configured host.")
def serve(config_path, port, host) -> None:
    """Run the HTTP gateway (chat-completions facade + env protocol)."""
    import uvicorn

    from .gateway import create_app

    app_config = load_app_config(config_path)
    app = create_app(app_config)
    uvicorn.run(
        app,
        host=host or app_config.host,
        port=port if port is not None else app_config.port,
        log_level="warning",
    )


@main.command(name="eval")
@click.option("--tasks", "tasks_path", type=click.Path(exists=True), required=True)
@click.option("--policy", "policy_spec", default="single:sim-mid", show_default=True)
@click.option("--k", type=float, default=None, help="Success bonus K.")
@click.option("--lambda", "lambda_", type=float, default=None, help="Cost penalty strength.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--ledger", "ledger_path", type=click.Path(), default=None,
              help="Also dump every CallRecord of the run as JSONL.")
def eval_command(tasks_path, policy_spec, k, lambda_, seed, out_path, config_path, catalog_path, workers, ledger_path) -> None:
    """Evaluate a policy over a JSONL task file and write report JSON."""
    app_config = load_app_config(config_path)
    if catalog_path is not None:
        app_config.catalog = load_catalog(catalog_path)
    reward_params = app_config.reward_params
    if k is not None or lambda_ is not None:
        reward_params = RewardParams(
            success_bonus_k=k if k is not None else reward_params.success_bonus_k,
            cost_penalty_lambda=(
                lambda_ if lambda_ is not None else reward_params.cost_penalty_lambda
            ),
        )
    tasks = load_tasks_jsonl(tasks_path)
    config = RunConfig(
        catalog=app_config.catalog,
        limits=app_config.limits,
        reward_params=reward_params,
        cost_config=app_config.cost_config,
        seed=seed,
    )
    policy = app_config.build_policy(policy_spec)
    report = run_eval(
        tasks,
        policy,
        config,
        policy_name=policy_spec,
        backend=app_config.build_backend(seed),
        workers=workers,
        ledger_path=ledger_path,
    )
    export_report(report, "json", out_path)
    agg = report.aggregates
    click.echo(
        f"{policy_spec}: accuracy={agg['accuracy']:.4f} "
        f"avg_cost_usd={agg['avg_cost_usd']} cost_utility={agg['cost_utility']}"
    )


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Default: stdout.")
def report(in_path, fmt, out_path) -> None:
    """Convert a report JSON into csv (or re-emit normalized json)."""
    loaded = EvalReport.from_json(Path(in_path).read_text())
    if out_path is None:
        from .harness import report_to_csv

        click.echo(report_to_csv(loaded) if fmt == "csv" else loaded.to_json(), nl=False)
    else:
        export_report(loaded, fmt, out_path)


@main.command()
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--lo", type=float, default=-0.2, show_default=True)
@click.option("--hi", type=float, default=0.2, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Default: stdout.")
def perturb(catalog_path, seed, lo, hi, out_path) -> None:
    """Deterministically perturb catalog prices and emit the new document."""
    catalog = load_catalog(catalog_path)
    perturbed = perturb_costs(catalog, (lo, hi), seed)
    text = json.dumps(catalog_to_document(perturbed), indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text)


if __name__ == "__main__":
    main()
