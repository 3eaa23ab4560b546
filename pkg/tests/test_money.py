from decimal import Decimal
from fractions import Fraction

import pytest

from xrouter.money import (
    MoneyError,
    nano_per_token,
    nano_usd,
    round_half_up,
    usd_per_mtok_string,
    usd_string,
)


def test_usd_string():
    assert usd_string(1_250_000_000) == "1.250000000"
    assert usd_string(0) == "0.000000000"
    assert usd_string(500) == "0.000000500"


@pytest.mark.parametrize(
    "usd_per_mtok,expected",
    [("1.25", 1250), ("10", 10_000), ("0.05", 50), (2, 2000), (0.4, 400)],
)
def test_nano_per_token_exact(usd_per_mtok, expected):
    assert nano_per_token(usd_per_mtok) == expected


def test_nano_per_token_rejects_unrepresentable():
    with pytest.raises(MoneyError):
        nano_per_token("0.0004")  # 0.4 nano-USD per token
    with pytest.raises(MoneyError):
        nano_per_token(Decimal("1.2345"))


def test_nano_usd_rejects_negative():
    with pytest.raises(MoneyError):
        nano_usd("-1")


def test_usd_per_mtok_string_roundtrip():
    for nano in (1250, 10_000, 50, 400, 1, 999):
        assert nano_per_token(usd_per_mtok_string(nano)) == nano


def test_round_half_up():
    assert round_half_up(Fraction(5, 2)) == 3
    assert round_half_up(Fraction(3, 2)) == 2
    assert round_half_up(Fraction(7, 5)) == 1
    assert round_half_up(Fraction(0)) == 0
