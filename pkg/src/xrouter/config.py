"""Run configuration: one TOML/JSON file drives the CLI and the gateway.

Sections (all optional, everything has a usable default):

    [catalog]    path = "catalog.toml"        # or inline models = [...]
    [limits]     max_turns, fan_out_cap, retry_max, retry_debounce_ms,
                 episode_budget_usd, call_deadline_ms
    [reward]     k, lambda                     # or lambda_preset = "lambda2"
    [cost]       per_turn_cap_usd, router_price_in_usd_per_mtok,
                 router_price_out_usd_per_mtok, router_overhead_usd
    [cache]      enabled, path
    [tasks]      path = "tasks.jsonl"
    [server]     host, port, session_idle_timeout_s
    [policies.<name>]  kind = "single" | "cascade" | "epsilon_greedy" | "direct" ...
    [[endpoints]]      name, base_url, api_key_env
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import tomli

from .catalog import Catalog, PriceSchedule, load_catalog, parse_catalog_document
from .episode import RunConfig, Task, load_tasks_jsonl
from .fixtures import default_catalog
from .ledger import CostConfig
from .money import nano_per_token, nano_usd
from .orchestrator import EpisodeLimits
from .policies import (
    cascade_policy,
    direct_policy,
    epsilon_greedy_policy,
    single_model_policy,
)
from .providers import CacheStore, EndpointConfig, PoolBackend
from .reward import LAMBDA_PRESETS, RewardParams

CONFIG_ENV_VAR = "XROUTER_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class AppConfig:
    catalog: Catalog = field(default_factory=default_catalog)
    limits: EpisodeLimits = field(default_factory=EpisodeLimits)
    reward_params: RewardParams = field(default_factory=RewardParams)
    cost_config: CostConfig = field(default_factory=CostConfig)
    cache_enabled: bool = False
    cache_path: str | None = None
    tasks_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    session_idle_timeout_s: float = 600.0
    policies: dict = field(default_factory=dict)
    endpoints: dict[str, EndpointConfig] = field(default_factory=dict)

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(
            catalog=self.catalog,
            limits=self.limits,
            reward_params=self.reward_params,
            cost_config=self.cost_config,
            seed=seed,
        )

    def build_backend(self, seed: int) -> PoolBackend:
        store = CacheStore(self.cache_path) if self.cache_path else None
        return PoolBackend(
            seed=seed,
            store=store,
            endpoints=self.endpoints,
            cache_enabled=self.cache_enabled and store is not None,
        )

    def build_policy(self, spec):
        """Resolve a policy from a config block or a CLI-style name.

        Names: "direct", "cascade", "epsilon-greedy", "single:<model>", or a
        key under [policies.*] in the config file.
        """
        if isinstance(spec, str):
            if spec in self.policies:
                return self.build_policy(self.policies[spec])
            if spec.startswith("single:"):
                return single_model_policy(spec.split(":", 1)[1])
            if spec == "cascade":
                return self.build_policy({"kind": "cascade"})
            if spec in ("epsilon-greedy", "epsilon_greedy"):
                return self.build_policy({"kind": "epsilon_greedy"})
            if spec == "direct":
                return self.build_policy({"kind": "direct"})
            raise ConfigError(f"unknown policy {spec!r}")
        kind = spec.get("kind")
        if kind == "single":
            return single_model_policy(spec["model"])
        if kind == "cascade":
            order = spec.get("order") or [
                m.name for m in sorted(self.catalog.models, key=_cheapness_key)
            ]
            return cascade_policy(order)
        if kind == "epsilon_greedy":
            epsilon = spec.get("epsilon", "inverse_sqrt")
            if epsilon == "inverse_sqrt":
                epsilon = _inverse_sqrt_epsilon
            return epsilon_greedy_policy(epsilon, seed=int(spec.get("seed", 0)))
        if kind == "direct":
            return direct_policy(spec.get("text", "I can help with that."))
        raise ConfigError(f"unknown policy kind {kind!r}")


def _cheapness_key(model) -> tuple:
    prices = model.prices
    return (prices.input_price + prices.output_price, prices.fixed_overhead, model.name)


def _inverse_sqrt_epsilon(t: int) -> float:
    return max(0.01, 1.0 / (t**0.5))


def _parse_reward(doc: dict) -> RewardParams:
    preset = doc.get("lambda_preset")
    if preset is not None:
        if preset not in LAMBDA_PRESETS:
            raise ConfigError(f"unknown lambda preset {preset!r}")
        lam = LAMBDA_PRESETS[preset]
    else:
        lam = float(doc.get("lambda", RewardParams().cost_penalty_lambda))
    return RewardParams(
        success_bonus_k=float(doc.get("k", RewardParams().success_bonus_k)),
        cost_penalty_lambda=lam,
    )


def _parse_limits(doc: dict) -> EpisodeLimits:
    defaults = EpisodeLimits()
    budget = doc.get("episode_budget_usd")
    return EpisodeLimits(
        max_turns=int(doc.get("max_turns", defaults.max_turns)),
        fan_out_cap=int(doc.get("fan_out_cap", defaults.fan_out_cap)),
        retry_max=int(doc.get("retry_max", defaults.retry_max)),
        retry_debounce_ms=int(doc.get("retry_debounce_ms", defaults.retry_debounce_ms)),
        episode_budget=nano_usd(budget) if budget is not None else defaults.episode_budget,
        call_deadline_ms=int(doc.get("call_deadline_ms", defaults.call_deadline_ms)),
    )


def _parse_cost(doc: dict) -> CostConfig:
    defaults = CostConfig()
    cap = doc.get("per_turn_cap_usd")
    router_prices = PriceSchedule(
        input_price=nano_per_token(doc.get("router_price_in_usd_per_mtok", 0)),
        output_price=nano_per_token(doc.get("router_price_out_usd_per_mtok", 0)),
        fixed_overhead=nano_usd(doc.get("router_overhead_usd", 0)),
    )
    return CostConfig(
        per_turn_cap=nano_usd(cap) if cap is not None else defaults.per_turn_cap,
        router_self_prices=router_prices,
    )


def load_app_config(path: str | Path | None = None) -> AppConfig:
    """Load a config file; path defaults to $XROUTER_CONFIG, else all defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return AppConfig()
    path = Path(path)
    raw = path.read_text()
    if path.suffix.lower() == ".toml":
        doc = tomli.loads(raw, parse_float=Decimal)
    else:
        doc = json.loads(raw, parse_float=Decimal)

    catalog_doc = doc.get("catalog", {})
    if "path" in catalog_doc:
        catalog_path = Path(catalog_doc["path"])
        if not catalog_path.is_absolute():
            catalog_path = path.parent / catalog_path
        catalog = load_catalog(catalog_path)
    elif "models" in catalog_doc:
        catalog = parse_catalog_document(catalog_doc)
    else:
        catalog = default_catalog()

    server = doc.get("server", {})
    cache = doc.get("cache", {})
    cache_path = cache.get("path")
    if cache_path and not Path(cache_path).is_absolute():
        cache_path = str(path.parent / cache_path)
    tasks_path = doc.get("tasks", {}).get("path")
    if tasks_path and not Path(tasks_path).is_absolute():
        tasks_path = str(path.parent / tasks_path)
    endpoints = {
        e["name"]: EndpointConfig(
            name=e["name"], base_url=e["base_url"], api_key_env=e.get("api_key_env", "")
        )
        for e in doc.get("endpoints", [])
    }
    return AppConfig(
        catalog=catalog,
        limits=_parse_limits(doc.get("limits", {})),
        reward_params=_parse_reward(doc.get("reward", {})),
        cost_config=_parse_cost(doc.get("cost", {})),
        cache_enabled=bool(cache.get("enabled", False)),
        cache_path=cache_path,
        tasks_path=tasks_path,
        host=server.get("host", "127.0.0.1"),
        port=int(server.get("port", 8080)),
        session_idle_timeout_s=float(server.get("session_idle_timeout_s", 600.0)),
        policies=doc.get("policies", {}),
        endpoints=endpoints,
    )


def load_task_file(path: str | Path) -> list[Task]:
    return load_tasks_jsonl(path)
