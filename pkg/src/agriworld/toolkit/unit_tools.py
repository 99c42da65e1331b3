"""Unit conversion exposed as a tool, so plans can normalize answers."""

from __future__ import annotations

from ..errors import ArgumentError
from ..units import convert_value, dim_of
from .registry import Param, ToolContext, ToolOutput, tool


@tool("units.convert", value=Param("any", data=True), to=Param("str"), unit=Param("str", required=False))
def convert(ctx: ToolContext, value, to, unit=None) -> ToolOutput:
    """Convert a number, a quantity ``{value, unit}``, or a series payload to ``to``."""
    dim_of(to)
    if isinstance(value, dict) and "values" in value:
        src = value.get("unit", unit)
        vals = [None if v is None else convert_value(float(v), src, to) for v in value["values"]]
        payload = dict(value, values=vals, unit=to)
        return ToolOutput("series", payload, {"unit": to})
    if isinstance(value, dict) and "value" in value:
        src = value.get("unit", unit)
        value = value["value"]
    else:
        src = unit
    if src is None:
        raise ArgumentError("source unit required", path="unit", expected="unit symbol")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ArgumentError("value must be numeric", path="value", observed=type(value).__name__)
    return ToolOutput("scalar", {"value": convert_value(float(value), src, to), "unit": to}, {"unit": to, "headline": "value"})
