from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agriworld.errors import DimensionMismatch, InvariantError, UnknownUnit
from agriworld.units import UNIT_SYMBOLS, Quantity, UnitDim, convert, dim_of, factor, quantity_add, units_of


def test_grams_to_kilograms():
    assert convert(Quantity(1000, "g"), "kg") == Quantity(1.0, "kg")


def test_tonnes_to_kilograms():
    assert convert(Quantity(0.5, "t"), "kg") == Quantity(500.0, "kg")


def test_mass_to_length_rejected():
    with pytest.raises(DimensionMismatch):
        convert(Quantity(3, "kg"), "mm")


def test_add_mixed_mass_units():
    assert quantity_add(Quantity(1, "kg"), Quantity(500, "g")) == Quantity(1.5, "kg")


def test_add_identity():
    assert Quantity(2, "mm") + Quantity(0, "mm") == Quantity(2.0, "mm")


def test_add_across_dimensions_rejected():
    with pytest.raises(DimensionMismatch):
        Quantity(2, "mm") + Quantity(2, "degC")


def test_areal_rate_never_coerces_to_mass():
    assert dim_of("kg_per_ha") != dim_of("kg")
    with pytest.raises(DimensionMismatch):
        convert(Quantity(1, "kg_per_ha"), "kg")


def test_unknown_symbol():
    with pytest.raises(UnknownUnit):
        Quantity(1.0, "furlong")


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), True, "3"])
def test_quantity_rejects_non_finite_or_non_numeric(bad):
    with pytest.raises(InvariantError):
        Quantity(bad, "kg")


def test_unit_dim_exponent_range():
    with pytest.raises(InvariantError):
        UnitDim(mass_exp=4)


def test_quantity_json_round_trip():
    q = Quantity(2.5, "mm_per_day")
    assert Quantity.from_json(q.to_json()) == q
    with pytest.raises(InvariantError):
        Quantity.from_json({"value": 1.0})


_pairs = st.sampled_from(
    [units_of(dim_of(u)) for u in UNIT_SYMBOLS if len(units_of(dim_of(u))) >= 2]
)


@given(_pairs, st.data())
def test_factors_compose_exactly(units, data):
    a = data.draw(st.sampled_from(units))
    b = data.draw(st.sampled_from(units))
    c = data.draw(st.sampled_from(units))
    assert factor(a, c) == factor(a, b) * factor(b, c)
    assert factor(a, a) == Fraction(1)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.sampled_from([("g", "kg"), ("kg", "t"), ("mm", "m"), ("hour", "day")]))
def test_round_trip_conversion(x, pair):
    a, b = pair
    back = convert(convert(Quantity(x, a), b), a)
    assert back.value == pytest.approx(x, rel=1e-12, abs=1e-12)
