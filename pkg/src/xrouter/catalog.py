"""Model catalog: loading, price perturbation, refresh, and prompt rendering.

A Catalog is an immutable snapshot. Every mutating operation returns a new
snapshot with a strictly larger version, and is a pure function of
(input catalog, parameters, seed), so concurrent episodes can share one
snapshot without coordination.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Collection, Mapping, Sequence

import tomli

from .money import (
    Money,
    MoneyError,
    nano_per_token,
    nano_usd,
    round_half_up,
    usd_per_mtok_string,
    usd_string,
)
from .rng import derive_seed, unit_fraction

TIERS = ("budget", "mid", "premium")
PROVIDER_KINDS = ("simulated", "cached", "live")
DIFFICULTY_TIERS = ("easy", "medium", "hard")

DEFAULT_PERTURB_RANGE = (-0.2, 0.2)


class CatalogError(ValueError):
    """Catalog document violates the schema or an invariant."""


@dataclass(frozen=True)
class PriceSchedule:
    """Per-token prices and per-call overhead, in integer nano-USD."""

    input_price: Money
    output_price: Money
    fixed_overhead: Money = 0

    def __post_init__(self) -> None:
        for field in ("input_price", "output_price", "fixed_overhead"):
            value = getattr(self, field)
            if not isinstance(value, int) or value < 0:
                raise CatalogError(f"{field} must be a non-negative integer, got {value!r}")


ZERO_PRICES = PriceSchedule(0, 0, 0)


@dataclass(frozen=True)
class CapabilityProfile:
    """Behavior of a simulated model: per-tier accuracy and response shape."""

    accuracy_by_tier: Mapping[str, float]
    output_tokens_min: int
    output_tokens_max: int
    latency_ms_nominal: int = 0

    def __post_init__(self) -> None:
        for tier, prob in self.accuracy_by_tier.items():
            if tier not in DIFFICULTY_TIERS:
                raise CatalogError(f"unknown difficulty tier {tier!r}")
            if not 0.0 <= prob <= 1.0:
                raise CatalogError(f"accuracy for tier {tier!r} outside [0,1]: {prob}")
        if self.output_tokens_min < 0 or self.output_tokens_min > self.output_tokens_max:
            raise CatalogError(
                f"bad output token range [{self.output_tokens_min}, {self.output_tokens_max}]"
            )
        if self.latency_ms_nominal < 0:
            raise CatalogError("latency must be >= 0")

    def accuracy_for(self, tier: str) -> float:
        if tier not in self.accuracy_by_tier:
            raise CatalogError(f"capability profile has no accuracy for tier {tier!r}")
        return self.accuracy_by_tier[tier]


@dataclass(frozen=True)
class ModelDescriptor:
    """One routable model: identity, pricing, and (if simulated) behavior."""

    name: str
    provider_kind: str
    tier: str
    description: str
    prices: PriceSchedule
    max_context: int
    capability: CapabilityProfile | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise CatalogError("model name must be non-empty")
        if self.provider_kind not in PROVIDER_KINDS:
            raise CatalogError(f"unknown provider_kind {self.provider_kind!r}")
        if self.tier not in TIERS:
            raise CatalogError(f"unknown tier {self.tier!r}")
        if self.max_context <= 0:
            raise CatalogError(f"max_context must be > 0, got {self.max_context}")
        if self.provider_kind == "simulated" and self.capability is None:
            raise CatalogError(f"simulated model {self.name!r} requires a capability profile")


@dataclass(frozen=True)
class Catalog:
    """Versioned, ordered pool of routable models."""

    version: int
    models: tuple[ModelDescriptor, ...]
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.version < 1:
            raise CatalogError("catalog version must be >= 1")
        if not self.models:
            raise CatalogError("catalog must contain at least one model")
        names = [m.name for m in self.models]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise CatalogError(f"duplicate model names: {sorted(dupes)}")

    @property
    def model_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.models)

    def get(self, name: str) -> ModelDescriptor:
        for model in self.models:
            if model.name == name:
                return model
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return any(m.name == name for m in self.models)


def _require(doc: Mapping, key: str, context: str):
    if key not in doc:
        raise CatalogError(f"{context}: missing required field {key!r}")
    return doc[key]


def _parse_capability(doc: Mapping, context: str) -> CapabilityProfile:
    accuracy = _require(doc, "accuracy", context)
    if not isinstance(accuracy, Mapping):
        raise CatalogError(f"{context}: accuracy must be a table of tier -> probability")
    out_tokens = _require(doc, "out_tokens", context)
    if not (isinstance(out_tokens, Sequence) and len(out_tokens) == 2):
        raise CatalogError(f"{context}: out_tokens must be a [min, max] pair")
    return CapabilityProfile(
        accuracy_by_tier={str(k): float(v) for k, v in accuracy.items()},
        output_tokens_min=int(out_tokens[0]),
        output_tokens_max=int(out_tokens[1]),
        latency_ms_nominal=int(doc.get("latency_ms", 0)),
    )


def _parse_model(doc: Mapping, index: int) -> ModelDescriptor:
    if not isinstance(doc, Mapping):
        raise CatalogError(f"models[{index}] must be a table/object")
    context = f"models[{index}]"
    name = _require(doc, "name", context)
    if not isinstance(name, str):
        raise CatalogError(f"{context}: name must be a string")
    context = f"model {name!r}"
    try:
        prices = PriceSchedule(
            input_price=nano_per_token(_require(doc, "price_in_usd_per_mtok", context)),
            output_price=nano_per_token(_require(doc, "price_out_usd_per_mtok", context)),
            fixed_overhead=nano_usd(doc.get("overhead_usd", 0)),
        )
    except MoneyError as exc:
        raise CatalogError(f"{context}: {exc}") from exc
    capability_doc = doc.get("capability")
    capability = _parse_capability(capability_doc, context) if capability_doc else None
    return ModelDescriptor(
        name=name,
        provider_kind=str(_require(doc, "provider_kind", context)),
        tier=str(_require(doc, "tier", context)),
        description=str(_require(doc, "description", context)),
        prices=prices,
        max_context=int(_require(doc, "max_context", context)),
        capability=capability,
    )


def parse_catalog_document(doc: Mapping) -> Catalog:
    """Build a version-1 Catalog from an already-parsed document."""
    if not isinstance(doc, Mapping):
        raise CatalogError("catalog document must be a table/object")
    models_doc = _require(doc, "models", "catalog")
    if not isinstance(models_doc, Sequence) or isinstance(models_doc, (str, bytes)):
        raise CatalogError("catalog: models must be an array")
    models = tuple(_parse_model(m, i) for i, m in enumerate(models_doc))
    return Catalog(version=1, models=models)


def load_catalog(source: str | Path | Mapping) -> Catalog:
    """Load a catalog from a TOML or JSON file (or a pre-parsed mapping).

    Prices in the document are decimal USD per million tokens; they are
    converted exactly to integer nano-USD per token, and values that do not
    convert exactly are rejected.
    """
    if isinstance(source, Mapping):
        return parse_catalog_document(source)
    path = Path(source)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        doc = tomli.loads(raw.decode("utf-8"), parse_float=Decimal)
    else:
        doc = json.loads(raw.decode("utf-8"), parse_float=Decimal)
    return parse_catalog_document(doc)


_PRICE_FIELDS = ("input_price", "output_price", "fixed_overhead")


def perturb_costs(
    catalog: Catalog,
    rel_range: tuple[float, float] = DEFAULT_PERTURB_RANGE,
    seed: int = 0,
) -> Catalog:
    """Scale every price field by a deterministic factor in [1+lo, 1+hi].

    The factor is drawn from (seed, model name, field tag); arithmetic is done
    in exact fractions and rounded half-up to integer nano-USD, so the same
    inputs always produce the identical catalog.
    """
    lo, hi = rel_range
    if not (-1 < lo <= hi):
        raise ValueError(f"rel_range must satisfy -1 < lo <= hi, got ({lo}, {hi})")
    lo_f, hi_f = Fraction(lo).limit_denominator(10**9), Fraction(hi).limit_denominator(10**9)
    models = []
    for model in catalog.models:
        scaled = {}
        for field in _PRICE_FIELDS:
            u = unit_fraction("perturb", seed, model.name, field)
            factor = 1 + lo_f + u * (hi_f - lo_f)
            scaled[field] = round_half_up(getattr(model.prices, field) * factor)
        models.append(replace(model, prices=PriceSchedule(**scaled)))
    return Catalog(version=catalog.version + 1, models=tuple(models), rng_seed=seed)


def refresh_catalog(catalog: Catalog, seed: int, mask: Collection[str] = ()) -> Catalog:
    """Deterministically permute model order, optionally hiding a masked subset.

    The output never gains names the input did not have; masking every model
    is rejected (an empty pool would leave the router nothing to call).
    """
    visible = [m for m in catalog.models if m.name not in set(mask)]
    if not visible:
        raise CatalogError("refresh would mask every model (empty pool)")
    order = list(range(len(visible)))
    random.Random(derive_seed("refresh", seed)).shuffle(order)
    models = tuple(visible[i] for i in order)
    return Catalog(version=catalog.version + 1, models=models, rng_seed=seed)


def _trim_usd(nano: Money) -> str:
    text = usd_string(nano).rstrip("0").rstrip(".")
    return text or "0"


def render_catalog_prompt(catalog: Catalog) -> str:
    """Stable text listing of the visible models, for the router's context.

    Depends only on model identity/pricing, never on catalog version, so
    refreshes that don't change content don't change the prompt.
    """
    lines = ["Available models:"]
    for model in catalog.models:
        prices = model.prices
        lines.append(
            f"- {model.name} [{model.tier}] "
            f"input ${usd_per_mtok_string(prices.input_price)}/M tokens, "
            f"output ${usd_per_mtok_string(prices.output_price)}/M tokens, "
            f"overhead ${_trim_usd(prices.fixed_overhead)}/call"
        )
        lines.append(f"  {model.description}")
    return "\n".join(lines) + "\n"


def catalog_to_document(catalog: Catalog) -> dict:
    """Render a catalog back to the file schema (prices in USD decimals)."""
    models = []
    for model in catalog.models:
        doc: dict = {
            "name": model.name,
            "provider_kind": model.provider_kind,
            "tier": model.tier,
            "description": model.description,
            "price_in_usd_per_mtok": usd_per_mtok_string(model.prices.input_price),
            "price_out_usd_per_mtok": usd_per_mtok_string(model.prices.output_price),
            "overhead_usd": _trim_usd(model.prices.fixed_overhead),
            "max_context": model.max_context,
        }
        if model.capability is not None:
            cap = model.capability
            doc["capability"] = {
                "accuracy": dict(cap.accuracy_by_tier),
                "out_tokens": [cap.output_tokens_min, cap.output_tokens_max],
                "latency_ms": cap.latency_ms_nominal,
            }
        models.append(doc)
    return {"models": models}
