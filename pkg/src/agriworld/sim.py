"""Deterministic bucket water-balance simulator and closed-form predictors.

Daily recurrence over the season, with soil capacity ``C`` sampled from the
``soil_water_capacity`` grid::

    S[t0]   = 0.5 C
    ET[t]   = kc[t] * et0[t]          kc = 0.4 / 1.0 / 0.7 by season third
    S[t+1]  = min(C, max(0, S[t] + P[t] + I[t] - ET[t]))
    stress  = max(0, 1 - S[t] / (0.5 C))
    yield   = Y_pot(crop) * max(0, 1 - 0.8 * mean(stress))

``pred.*`` are screening formulas deliberately separate from the recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from . import canonical
from .errors import ArgumentError, InvariantError
from .model import WorldState
from .toolkit.common import check_window, window
from .toolkit.grid import sample_parcel
from .toolkit.registry import Param, ToolContext, ToolOutput, tool
from .toolkit.wx import daily_weather
from .units import Quantity

Y_POT = {"maize": 10000.0, "wheat": 7000.0, "soy": 3500.0, "rice": 8000.0}
KC_STAGES = (0.4, 1.0, 0.7)
INITIAL_FRACTION = 0.5
CRITICAL_FRACTION = 0.5
YIELD_RESPONSE = 0.8
DISEASE_RATE = 0.02

INTERVENTION_UNITS = {"irrigation_delta": "mm_per_day", "irrigation_scale": "dimensionless", "sowing_shift": "day"}


@dataclass(frozen=True)
class Intervention:
    action: str
    magnitude: Quantity
    window: tuple[int, int]

    def __post_init__(self) -> None:
        if self.action not in INTERVENTION_UNITS:
            raise InvariantError(
                f"unknown intervention action {self.action!r}",
                path="action",
                observed=self.action,
                expected=sorted(INTERVENTION_UNITS),
            )
        want = INTERVENTION_UNITS[self.action]
        if self.magnitude.unit != want:
            raise InvariantError(
                f"{self.action} magnitude must be in {want}", path="magnitude.unit", observed=self.magnitude.unit, expected=want
            )
        if self.action == "irrigation_scale" and self.magnitude.value < 0:
            raise InvariantError("irrigation_scale must be >= 0", path="magnitude", observed=self.magnitude.value)
        w0, w1 = int(self.window[0]), int(self.window[1])
        if w1 < w0:
            raise InvariantError("intervention window end before start", path="window", observed=[w0, w1])
        object.__setattr__(self, "window", (w0, w1))

    def to_json(self) -> dict[str, Any]:
        return {"action": self.action, "magnitude": self.magnitude.to_json(), "window": list(self.window)}

    @classmethod
    def from_json(cls, obj: Any) -> Optional["Intervention"]:
        if obj is None or isinstance(obj, Intervention):
            return obj
        if not isinstance(obj, dict):
            raise InvariantError("intervention must be an object", observed=obj)
        try:
            return cls(obj["action"], Quantity.from_json(obj["magnitude"]), tuple(obj["window"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantError(f"malformed intervention: {exc!r}", observed=obj) from None


@dataclass(frozen=True)
class DayRecord:
    t: int
    soil_water_mm: float
    et_mm: float
    stress: float
    precip_mm: float
    irrigation_mm: float
    clamped: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "soil_water_mm": self.soil_water_mm,
            "et_mm": self.et_mm,
            "stress": self.stress,
            "precip_mm": self.precip_mm,
            "irrigation_mm": self.irrigation_mm,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class SimResult:
    parcel_id: str
    capacity_mm: float
    per_day: tuple[DayRecord, ...]
    final_soil_water_mm: float
    stress_index: float
    yield_: Quantity
    trace_prov: str
    warnings: tuple[str, ...] = field(default=())

    def to_json(self) -> dict[str, Any]:
        return {
            "parcel_id": self.parcel_id,
            "capacity_mm": self.capacity_mm,
            "per_day": [d.to_json() for d in self.per_day],
            "final_soil_water_mm": self.final_soil_water_mm,
            "stress_index": self.stress_index,
            "yield": self.yield_.to_json(),
            "trace_prov": self.trace_prov,
            "warnings": list(self.warnings),
        }


def kc_for(i: int, n: int, shift: int = 0) -> float:
    """Crop coefficient for day offset ``i`` of an ``n``-day season."""
    j = min(max(i - shift, 0), n - 1)
    if 3 * j < n:
        return KC_STAGES[0]
    if 3 * j < 2 * n:
        return KC_STAGES[1]
    return KC_STAGES[2]


def _ctx(world: Union[WorldState, ToolContext]) -> ToolContext:
    return world if isinstance(world, ToolContext) else ToolContext(world)


def capacity_mm(ctx: ToolContext, pid: str) -> float:
    world = ctx.world
    grid = world.grid_named("soil_water_capacity")
    parcel = world.parcels.get(pid) or world.parcel(pid)
    cap, _ = sample_parcel(ctx, grid, pid, parcel.geometry, auto_align=True)
    return cap


def _crop(world: WorldState, pid: str) -> str:
    p = world.parcel(pid)
    if p.crop_type is None:
        raise ArgumentError(f"{pid} is not a cropped parcel", path="parcel_id", observed=pid)
    return p.crop_type


def run(world: Union[WorldState, ToolContext], parcel_id: str, intervention: Optional[Intervention] = None) -> SimResult:
    ctx = _ctx(world)
    w = ctx.world
    crop = _crop(w, parcel_id)
    s0, s1 = w.season
    n = s1 - s0 + 1
    if intervention is not None:
        check_window(intervention.window, w.season, "intervention")
    cap = capacity_mm(ctx, parcel_id)
    region = w.parcel(parcel_id).region_id
    precip = [v for _, v in daily_weather(w, region, "precip_mm", (s0, s1))]
    et0 = [v for _, v in daily_weather(w, region, "et0_mm", (s0, s1))]
    logged = w.irrigation(parcel_id)

    shift = 0
    if intervention is not None and intervention.action == "sowing_shift":
        shift = int(round(intervention.magnitude.value))

    warnings = []
    days = []
    soil = INITIAL_FRACTION * cap
    crit = CRITICAL_FRACTION * cap
    for i in range(n):
        t = s0 + i
        irr = logged.get(t, 0.0)
        if intervention is not None and intervention.window[0] <= t <= intervention.window[1]:
            if intervention.action == "irrigation_delta":
                irr = irr + intervention.magnitude.value
            elif intervention.action == "irrigation_scale":
                irr = irr * intervention.magnitude.value
        if irr < 0.0:
            warnings.append(f"negative effective irrigation clamped to 0 at t={t}")
            irr = 0.0
        et = kc_for(i, n, shift) * et0[i]
        stress = max(0.0, 1.0 - soil / crit)
        raw = soil + precip[i] + irr - et
        nxt = min(cap, max(0.0, raw))
        days.append(DayRecord(t, soil, et, stress, precip[i], irr, nxt != raw))
        soil = nxt
    stress_index = math.fsum(d.stress for d in days) / n
    yld = Quantity(Y_POT[crop] * max(0.0, 1.0 - YIELD_RESPONSE * stress_index), "kg_per_ha")
    trace = canonical.digest(
        {
            "world": w.world_id,
            "parcel_id": parcel_id,
            "intervention": intervention.to_json() if intervention else None,
            "per_day": [d.to_json() for d in days],
            "alignment": ctx.alignment,
        }
    )
    return SimResult(parcel_id, cap, tuple(days), soil, stress_index, yld, trace, tuple(warnings))


def delta(
    world: Union[WorldState, ToolContext],
    parcel_id: str,
    intervention: Optional[Intervention],
    target: str = "stress_index",
) -> tuple[float, SimResult, SimResult]:
    """``M(s, a_int) - M(s, a_base)`` on ``target``; returns the two arms too."""
    if target not in ("stress_index", "yield"):
        raise ArgumentError(f"unknown target {target!r}", path="target", observed=target, expected=["stress_index", "yield"])
    base = run(world, parcel_id, None)
    arm = run(world, parcel_id, intervention)
    if target == "stress_index":
        return arm.stress_index - base.stress_index, base, arm
    return arm.yield_.value - base.yield_.value, base, arm


def stress_screen(world: Union[WorldState, ToolContext], parcel_id: str, time_range: tuple[int, int]) -> float:
    """Cumulative-deficit stress proxy ``min(1, D / (0.5 C N))``."""
    ctx = _ctx(world)
    w = ctx.world
    _crop(w, parcel_id)
    t0, t1 = window(time_range)
    check_window((t0, t1), w.season, "pred.stress")
    s0, s1 = w.season
    n_season = s1 - s0 + 1
    cap = capacity_mm(ctx, parcel_id)
    region = w.parcel(parcel_id).region_id
    precip = daily_weather(w, region, "precip_mm", (t0, t1))
    et0 = daily_weather(w, region, "et0_mm", (t0, t1))
    logged = w.irrigation(parcel_id)
    deficits = [
        max(0.0, kc_for(t - s0, n_season) * e - p - logged.get(t, 0.0)) for (t, p), (_, e) in zip(precip, et0)
    ]
    n = t1 - t0 + 1
    return min(1.0, math.fsum(deficits) / (CRITICAL_FRACTION * cap * n))


def yield_screen(world: Union[WorldState, ToolContext], parcel_id: str) -> tuple[Quantity, float]:
    w = _ctx(world).world
    stress = stress_screen(world, parcel_id, w.season)
    return Quantity(Y_POT[_crop(w, parcel_id)] * (1.0 - YIELD_RESPONSE * stress), "kg_per_ha"), stress


def disease_risk(world: Union[WorldState, ToolContext], parcel_id: str, time_range: tuple[int, int]) -> tuple[float, int]:
    w = _ctx(world).world
    t0, t1 = window(time_range)
    check_window((t0, t1), w.season, "pred.disease")
    region = w.parcel(parcel_id).region_id
    rh = daily_weather(w, region, "rh_pct", (t0, t1))
    tx = daily_weather(w, region, "tmax_degC", (t0, t1))
    tn = daily_weather(w, region, "tmin_degC", (t0, t1))
    days = sum(1 for (_, h), (_, a), (_, b) in zip(rh, tx, tn) if h > 85.0 and 15.0 <= (a + b) / 2.0 <= 25.0)
    return min(1.0, DISEASE_RATE * days), days


# -- tools ------------------------------------------------------------------


def _intervention_arg(obj: Any) -> Optional[Intervention]:
    try:
        return Intervention.from_json(obj)
    except InvariantError as exc:
        raise ArgumentError(exc.message, path="intervention" + ("." + exc.path if exc.path else ""), observed=exc.observed, expected=exc.expected) from None


@tool("sim.run", parcel_id=Param("str", data=True), intervention=Param("dict", required=False))
def sim_run(ctx: ToolContext, parcel_id, intervention=None) -> ToolOutput:
    """Run the water-balance recurrence over the season."""
    res = run(ctx, parcel_id, _intervention_arg(intervention))
    payload = res.to_json()
    payload["intervention"] = intervention
    return ToolOutput("table", payload, {"unit": "mm", "headline": "yield.value"})


@tool(
    "sim.delta",
    parcel_id=Param("str", data=True),
    intervention=Param("dict", required=False),
    target=Param("str", False, "stress_index"),
)
def sim_delta(ctx: ToolContext, parcel_id, intervention=None, target="stress_index") -> ToolOutput:
    """Signed effect of an intervention against the empty-intervention baseline."""
    iv = _intervention_arg(intervention)
    d, base, arm = delta(ctx, parcel_id, iv, target)
    if target == "stress_index":
        b, a, unit = base.stress_index, arm.stress_index, "dimensionless"
    else:
        b, a, unit = base.yield_.value, arm.yield_.value, "kg_per_ha"
    payload = {
        "parcel_id": parcel_id,
        "target": target,
        "intervention": iv.to_json() if iv else None,
        "baseline": b,
        "intervened": a,
        "delta": d,
        "baseline_prov": base.trace_prov,
        "intervention_prov": arm.trace_prov,
        "warnings": list(arm.warnings),
    }
    return ToolOutput("scalar", payload, {"unit": unit, "headline": "delta"})


@tool("pred.stress", parcel_id=Param("str", data=True), time_range=Param("window"))
def pred_stress(ctx: ToolContext, parcel_id, time_range) -> ToolOutput:
    """Closed-form deficit stress screen in [0, 1]."""
    v = stress_screen(ctx, parcel_id, tuple(time_range))
    return ToolOutput(
        "scalar",
        {"parcel_id": parcel_id, "value": v, "unit": "dimensionless"},
        {"unit": "dimensionless", "t_range": list(time_range), "headline": "value"},
    )


@tool("pred.yield", parcel_id=Param("str", data=True))
def pred_yield(ctx: ToolContext, parcel_id) -> ToolOutput:
    """Potential yield scaled by the season stress screen."""
    q, stress = yield_screen(ctx, parcel_id)
    return ToolOutput(
        "scalar",
        {"parcel_id": parcel_id, "value": q.value, "unit": q.unit, "stress": stress},
        {"unit": q.unit, "headline": "value"},
    )


@tool("pred.disease", parcel_id=Param("str", data=True), time_range=Param("window"))
def pred_disease(ctx: ToolContext, parcel_id, time_range) -> ToolOutput:
    """Humid-and-mild day-count disease risk in [0, 1]."""
    risk, days = disease_risk(ctx, parcel_id, tuple(time_range))
    return ToolOutput(
        "scalar",
        {"parcel_id": parcel_id, "value": risk, "unit": "dimensionless", "qualifying_days": days},
        {"unit": "dimensionless", "t_range": list(time_range), "headline": "value"},
    )
