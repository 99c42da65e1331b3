"""Weather variables: daily series, rolling sums, growing degree days."""

from __future__ import annotations

import math

from ..align import AlignmentPolicy, resample_series
from ..errors import ArgumentError, DimensionMismatch, UnknownBand
from ..model import WEATHER_VARS, Crs, WorldState
from .common import as_series, check_window, series_payload, window
from .registry import Param, ToolContext, ToolOutput, tool

_LINEAR_HOLD = AlignmentPolicy(target_crs=Crs.geo(), interp="linear", extrapolation="hold")


def daily_weather(world: WorldState, region: str, var: str, t_range: tuple[int, int]) -> list[tuple[int, float]]:
    """Daily values of ``var`` over ``t_range`` (inclusive).

    Precipitation gaps are zero, never interpolated; the other variables are
    linearly interpolated inside the record span and held beyond it.
    """
    if var not in WEATHER_VARS:
        raise UnknownBand(f"unknown weather variable {var!r}", path="var", observed=var, expected=sorted(WEATHER_VARS))
    stream = world.weather_for(region)
    check_window(t_range, world.season, f"wx.get({var})")
    t0, t1 = t_range
    if var == "precip_mm":
        by_t = {r.t: r.vars[var] for r in stream.records}
        return [(t, by_t.get(t, 0.0)) for t in range(t0, t1 + 1)]
    return resample_series(stream.series(var), _LINEAR_HOLD, (t0, t1))


@tool(
    "wx.get",
    region=Param("str", data=True),
    time_range=Param("window"),
    var=Param("str", data=True),
)
def get(ctx: ToolContext, region, time_range, var) -> ToolOutput:
    """Daily series of one weather variable for a region."""
    t_range = window(time_range)
    series = daily_weather(ctx.world, region, var, t_range)
    unit = WEATHER_VARS[var]
    payload = series_payload([t for t, _ in series], [v for _, v in series], unit, var=var, region=region)
    return ToolOutput("series", payload, {"unit": unit, "t_range": list(t_range)})


@tool("wx.rolling_sum", series=Param("series", data=True), window=Param("int"))
def rolling_sum(ctx: ToolContext, series, window) -> ToolOutput:
    """Trailing sum over the last ``window`` samples; warm-up positions are null."""
    if window < 1:
        raise ArgumentError("window must be >= 1", path="window", observed=window)
    t, x, unit = as_series(series, "series")
    out = []
    for i in range(len(x)):
        chunk = x[i - window + 1 : i + 1] if i + 1 >= window else None
        if chunk is None or any(v is None for v in chunk):
            out.append(None)
        else:
            out.append(math.fsum(float(v) for v in chunk))
    return ToolOutput("series", series_payload(t, out, unit, window=window), {"unit": unit})


def _require_degc(unit: str, path: str) -> None:
    if unit != "degC":
        raise DimensionMismatch(f"{path} must be in degC, got {unit}", path=path, observed=unit, expected="degC")


@tool(
    "wx.degree_days",
    tmax_series=Param("series", data=True),
    tmin_series=Param("series", data=True),
    t_base=Param("number", False, 10.0),
)
def degree_days(ctx: ToolContext, tmax_series, tmin_series, t_base=10.0) -> ToolOutput:
    """Cumulative growing degree days, ``max(0, (tmax + tmin)/2 - t_base)`` per day."""
    tx, vx, ux = as_series(tmax_series, "tmax_series")
    tn, vn, un = as_series(tmin_series, "tmin_series")
    _require_degc(ux, "tmax_series")
    _require_degc(un, "tmin_series")
    if tx != tn:
        raise ArgumentError("tmax and tmin series must share timestamps", path="tmin_series")
    base = float(t_base)
    daily = [max(0.0, (float(a) + float(b)) / 2.0 - base) for a, b in zip(vx, vn)]
    cumulative = [math.fsum(daily[: i + 1]) for i in range(len(daily))]
    payload = series_payload(tx, cumulative, "degC_day", daily=daily, t_base=base)
    return ToolOutput("series", payload, {"unit": "degC_day", "headline": "values.-1"})
