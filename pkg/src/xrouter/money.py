"""Exact money arithmetic in integer nano-USD (1 USD = 10**9 nano-USD).

All ledger math stays in integers; decimal strings exist only at the
serialization boundary. Python ints are unbounded, so sums never wrap.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation
from fractions import Fraction

# A monetary amount, always integer nano-USD.
Money = int

NANO_PER_USD = 10**9

# Catalog files quote prices in USD per million tokens; one token therefore
# costs usd_per_mtok * 1e9 / 1e6 = usd_per_mtok * 1000 nano-USD.
NANO_PER_TOKEN_PER_USD_PER_MTOK = 1000


class MoneyError(ValueError):
    """A monetary value is negative or not exactly representable."""


def usd_string(nano: Money) -> str:
    """Render nano-USD as a fixed 9-decimal USD string, e.g. 1250 -> '0.000001250'."""
    sign = "-" if nano < 0 else ""
    whole, frac = divmod(abs(nano), NANO_PER_USD)
    return f"{sign}{whole}.{frac:09d}"


def nano_usd(value: Decimal | str | int | float) -> Money:
    """Convert a USD amount to nano-USD, rejecting anything not exact.

    Floats are converted through their shortest decimal repr so that catalog
    literals like 0.05 mean five cents, not the nearest binary float.
    """
    try:
        dec = value if isinstance(value, Decimal) else Decimal(str(value))
    except InvalidOperation as exc:
        raise MoneyError(f"not a decimal amount: {value!r}") from exc
    scaled = dec * NANO_PER_USD
    if scaled != scaled.to_integral_value():
        raise MoneyError(f"{value} USD is not representable in integer nano-USD")
    nano = int(scaled)
    if nano < 0:
        raise MoneyError(f"negative amount: {value}")
    return nano


def nano_per_token(usd_per_mtok: Decimal | str | int | float) -> Money:
    """Convert a USD-per-million-tokens price to nano-USD per token, exactly."""
    try:
        dec = usd_per_mtok if isinstance(usd_per_mtok, Decimal) else Decimal(str(usd_per_mtok))
    except InvalidOperation as exc:
        raise MoneyError(f"not a decimal price: {usd_per_mtok!r}") from exc
    scaled = dec * NANO_PER_TOKEN_PER_USD_PER_MTOK
    if scaled != scaled.to_integral_value():
        raise MoneyError(
            f"{usd_per_mtok} USD/Mtok is not representable in integer nano-USD per token"
        )
    nano = int(scaled)
    if nano < 0:
        raise MoneyError(f"negative price: {usd_per_mtok}")
    return nano


def usd_per_mtok_string(nano_per_tok: Money) -> str:
    """Inverse of nano_per_token for rendering: 1250 -> '1.25'."""
    frac = Fraction(nano_per_tok, NANO_PER_TOKEN_PER_USD_PER_MTOK)
    whole, rem = divmod(frac.numerator, frac.denominator)
    if rem == 0:
        return str(whole)
    # denominator divides 1000, so three decimals always suffice
    digits = f"{rem * 1000 // frac.denominator:03d}".rstrip("0")
    return f"{whole}.{digits}"


def round_half_up(value: Fraction) -> int:
    """Round an exact non-negative fraction to the nearest integer, ties up."""
    return (2 * value.numerator + value.denominator) // (2 * value.denominator)
