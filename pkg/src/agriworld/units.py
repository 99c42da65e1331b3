"""Physical quantities with dimensional units.

Area is a base dimension of its own, so ``kg_per_ha`` (mass / area) never
coerces to ``kg`` and ``mm`` of water never coerces to an areal rate.
Conversion factors are exact rationals; ``factor(a, c) == factor(a, b) *
factor(b, c)`` holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .errors import DimensionMismatch, InvariantError, UnknownUnit


@dataclass(frozen=True)
class UnitDim:
    mass_exp: int = 0
    length_exp: int = 0
    time_exp: int = 0
    temperature_exp: int = 0
    area_exp: int = 0

    def __post_init__(self) -> None:
        for name in ("mass_exp", "length_exp", "time_exp", "temperature_exp", "area_exp"):
            e = getattr(self, name)
            if not isinstance(e, int) or not -3 <= e <= 3:
                raise InvariantError(f"UnitDim.{name} must be an integer in [-3, 3]", path=name, observed=e)


MASS = UnitDim(mass_exp=1)
LENGTH = UnitDim(length_exp=1)
TIME = UnitDim(time_exp=1)
TEMPERATURE = UnitDim(temperature_exp=1)
AREA = UnitDim(area_exp=1)
DIMENSIONLESS = UnitDim()

# symbol -> (dimension, factor to the canonical unit of that dimension)
_UNITS: dict[str, tuple[UnitDim, Fraction]] = {
    "g": (MASS, Fraction(1, 1000)),
    "kg": (MASS, Fraction(1)),
    "t": (MASS, Fraction(1000)),
    "mm": (LENGTH, Fraction(1, 1000)),
    "m": (LENGTH, Fraction(1)),
    "day": (TIME, Fraction(1)),
    "hour": (TIME, Fraction(1, 24)),
    "degC": (TEMPERATURE, Fraction(1)),
    "degC_day": (UnitDim(temperature_exp=1, time_exp=1), Fraction(1)),
    "ha": (AREA, Fraction(1)),
    "kg_per_ha": (UnitDim(mass_exp=1, area_exp=-1), Fraction(1)),
    "mm_per_day": (UnitDim(length_exp=1, time_exp=-1), Fraction(1, 1000)),
    "dimensionless": (DIMENSIONLESS, Fraction(1)),
}

UNIT_SYMBOLS = tuple(sorted(_UNITS))


def is_unit(symbol: Any) -> bool:
    return isinstance(symbol, str) and symbol in _UNITS


def dim_of(symbol: str) -> UnitDim:
    try:
        return _UNITS[symbol][0]
    except (KeyError, TypeError):
        raise UnknownUnit(f"unknown unit symbol {symbol!r}", observed=symbol, expected=list(UNIT_SYMBOLS)) from None


def same_dim(a: str, b: str) -> bool:
    return dim_of(a) == dim_of(b)


def factor(src: str, dst: str) -> Fraction:
    """Exact multiplicative factor taking a value in ``src`` to ``dst``."""
    if dim_of(src) != dim_of(dst):
        raise DimensionMismatch(
            f"cannot convert {src} to {dst}: dimensions differ",
            observed=src,
            expected=dst,
        )
    return _UNITS[src][1] / _UNITS[dst][1]


def scale(value: float, f: Fraction) -> float:
    # a single rounding whenever the factor is an integer or a reciprocal integer
    if f.denominator == 1:
        return value * f.numerator
    if f.numerator == 1:
        return value / f.denominator
    return value * f.numerator / f.denominator


def convert_value(value: float, src: str, dst: str) -> float:
    if src == dst:
        return value
    return scale(value, factor(src, dst))


def units_of(dim: UnitDim) -> list[str]:
    return [s for s in UNIT_SYMBOLS if _UNITS[s][0] == dim]


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str

    def __post_init__(self) -> None:
        dim_of(self.unit)
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise InvariantError("quantity value must be a real number", observed=self.value)
        if not math.isfinite(self.value):
            raise InvariantError("quantity value must be finite", observed=repr(self.value))
        object.__setattr__(self, "value", float(self.value))

    @property
    def dim(self) -> UnitDim:
        return dim_of(self.unit)

    def to(self, target: str) -> "Quantity":
        return convert(self, target)

    def to_json(self) -> dict[str, Any]:
        return {"value": self.value, "unit": self.unit}

    @classmethod
    def from_json(cls, obj: Any) -> "Quantity":
        if not isinstance(obj, dict) or set(obj) != {"value", "unit"}:
            raise InvariantError("quantity must be an object with keys value, unit", observed=obj)
        return cls(obj["value"], obj["unit"])

    def __add__(self, other: "Quantity") -> "Quantity":
        return quantity_add(self, other)


def convert(q: Quantity, target: str) -> Quantity:
    """Convert ``q`` to ``target``; raises :class:`DimensionMismatch` across dimensions."""
    dim_of(target)
    return Quantity(convert_value(q.value, q.unit, target), target)


def quantity_add(a: Quantity, b: Quantity) -> Quantity:
    if a.dim != b.dim:
        raise DimensionMismatch(
            f"cannot add {b.unit} to {a.unit}: dimensions differ",
            observed=b.unit,
            expected=a.unit,
        )
    return Quantity(a.value + convert(b, a.unit).value, a.unit)
