"""Four-family task generator with sealed references.

Every task ships a reference plan; the generator executes it and keeps the
task only if the checker accepts the reference answer (otherwise it
resamples). Numeric references are sealed from that same execution.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Callable, Optional

import numpy as np

from ..agent.plan import PlanProgram, ref
from ..align import AlignmentPolicy
from ..errors import AgroError, GenerationExhausted, UnknownVariant
from ..model import WorldState
from ..protocol.checker import check
from ..protocol.reference import run_reference
from ..protocol.tasks import (
    CheckerConfig,
    CounterfactualCheck,
    NumericCheck,
    OutputSchema,
    PhysicalCheck,
    SchemaField,
    SpatialCheck,
    TaskInstance,
)
from ..sim import Intervention, delta as sim_delta
from ..toolkit.rs import zscores
from ..units import Quantity
from .worldgen import FAMILIES, GenConfig, anomaly_windows, unmasked_zonal_means

MAX_ATTEMPTS = 100
DEFAULT_BUDGET = 20
SWEEP_POINTS = 21
IRRIGATION_BOUNDS = (0.0, 10.0)
THRESHOLDS = (2.5, 3.0, 3.5)


def _plan(steps: list[tuple[str, str, dict]], answer: Any) -> PlanProgram:
    return PlanProgram.from_json({"steps": [{"id": i, "call": {"tool": t, "args": a}} for i, t, a in steps], "answer": answer})


def _schema(*fields: SchemaField) -> OutputSchema:
    return OutputSchema(tuple(fields))


class _Builder:
    def __init__(self, world: WorldState, seed: int, budget: int) -> None:
        self.world = world
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.budget = budget
        self.raster = world.raster_with_band("ndvi")
        self.grid = world.grid_named("soil_water_capacity")
        self.pids = sorted(world.parcels)
        self.season = world.season

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def base_bindings(self, **kw: Any) -> dict[str, Any]:
        out = {"world_id": self.world.world_id, "season": list(self.season)}
        out.update(kw)
        return out

    def task(self, tid: str, family: str, variant: str, q: str, bindings: dict, schema: OutputSchema, checker: CheckerConfig, plan: PlanProgram, **kw: Any) -> TaskInstance:
        return TaskInstance(tid, q, bindings, schema, checker, self.budget, family, plan, variant=variant, **kw)

    # -- lookup ------------------------------------------------------------

    def lookup_ndvi(self, tid: str) -> TaskInstance:
        p = self.pick(self.pids)
        stamps = self.raster.timestamps
        i0 = int(self.rng.integers(0, len(stamps) - 4))
        i1 = min(len(stamps) - 1, i0 + int(self.rng.integers(3, 8)))
        window = [int(stamps[i0]), int(stamps[i1])]
        crs = self.raster.crs.to_json()
        plan = _plan(
            [
                ("s1", "geo.align", {"parcels": [p], "crs": crs}),
                ("s2", "rs.load", {"index": "ndvi", "time_range": window, "region": [p]}),
                ("s3", "rs.zonal_stats", {"raster_ts": ref("s2"), "parcels": ref("s1"), "stat": "mean"}),
            ],
            {"parcel_id": p, "value": ref("s3", f"summary.{p}"), "unit": "dimensionless"},
        )
        schema = _schema(
            SchemaField("parcel_id", "string", enum=(p,)),
            SchemaField("value", "number"),
            SchemaField("unit", "string", unit="dimensionless", enum=("dimensionless",)),
        )
        q = f"What is the mean cloud-free NDVI of parcel {p} between day {window[0]} and day {window[1]}?"
        b = self.base_bindings(parcel_id=p, parcel_ids=[p], band="ndvi", time_range=window, stat="mean")
        return self.task(tid, "lookup", "ndvi", q, b, schema, self._numeric_stub("dimensionless"), plan, alignment=self._policy())

    def lookup_soil(self, tid: str) -> TaskInstance:
        p = self.pick(self.pids)
        plan = _plan(
            [
                ("s1", "geo.align", {"parcels": [p], "crs": self.grid.crs.to_json()}),
                ("s2", "grid.sample", {"gridfield": "soil_water_capacity", "parcels": ref("s1")}),
            ],
            {"parcel_id": p, "value": ref("s2", f"values.{p}.value"), "unit": "mm"},
        )
        schema = _schema(
            SchemaField("parcel_id", "string", enum=(p,)),
            SchemaField("value", "number"),
            SchemaField("unit", "string", unit="mm", enum=("mm",)),
        )
        q = f"What is the soil water holding capacity of parcel {p}, in mm?"
        b = self.base_bindings(parcel_id=p, parcel_ids=[p], gridfield="soil_water_capacity")
        return self.task(tid, "lookup", "soil", q, b, schema, self._numeric_stub("mm"), plan, alignment=self._policy())

    # -- forecast ----------------------------------------------------------

    def forecast_yield(self, tid: str) -> TaskInstance:
        p = self.pick(self.pids)
        plan = _plan([("s1", "pred.yield", {"parcel_id": p})], {"parcel_id": p, "value": ref("s1", "value"), "unit": "kg_per_ha"})
        schema = _schema(
            SchemaField("parcel_id", "string", enum=(p,)),
            SchemaField("value", "number"),
            SchemaField("unit", "string", unit="kg_per_ha", enum=("kg_per_ha",)),
        )
        q = f"Forecast the end-of-season yield of parcel {p} in kg/ha."
        return self.task(tid, "forecast", "yield", q, self.base_bindings(parcel_id=p), schema, self._numeric_stub("kg_per_ha"), plan)

    def forecast_gdd(self, tid: str) -> TaskInstance:
        region = self.pick(self.world.regions())
        season = list(self.season)
        plan = _plan(
            [
                ("s1", "wx.get", {"region": region, "time_range": season, "var": "tmax_degC"}),
                ("s2", "wx.get", {"region": region, "time_range": season, "var": "tmin_degC"}),
                ("s3", "wx.degree_days", {"tmax_series": ref("s1"), "tmin_series": ref("s2"), "t_base": 10.0}),
            ],
            {"region": region, "value": ref("s3", "values.-1"), "unit": "degC_day", "series": ref("s3", "values")},
        )
        schema = _schema(
            SchemaField("region", "string", enum=(region,)),
            SchemaField("value", "number"),
            SchemaField("unit", "string", unit="degC_day", enum=("degC_day",)),
            SchemaField("series", "series"),
        )
        q = f"How many growing degree days (base 10 degC) accumulate in region {region} by season end?"
        b = self.base_bindings(region=region, time_range=season, t_base=10.0)
        return self.task(tid, "forecast", "gdd", q, b, schema, self._numeric_stub("degC_day"), plan)

    # -- anomaly -----------------------------------------------------------

    def anomaly(self, tid: str) -> TaskInstance:
        region = self.pick(self.world.regions())
        thr = float(self.pick(THRESHOLDS))
        analysis, baseline = anomaly_windows(self.season, self.raster.timestamps[-1])
        members = self.world.region_parcels(region)
        t, means = unmasked_zonal_means(self.world, members, analysis)
        truth = sorted(pid for pid in members if zscores(t, means[pid], baseline, thr)["flagged_days"])
        plan = _plan(
            [
                ("s1", "geo.filter_parcels", {"region": region}),
                ("s2", "geo.align", {"parcels": ref("s1"), "crs": self.raster.crs.to_json()}),
                ("s3", "rs.load", {"index": "ndvi", "time_range": list(analysis), "region": region}),
                ("s4", "rs.zonal_stats", {"raster_ts": ref("s3"), "parcels": ref("s2"), "stat": "mean"}),
                ("s5", "rs.anomaly", {"ts": ref("s4"), "baseline_window": list(baseline), "threshold": thr}),
            ],
            {"region": region, "parcel_id_list": ref("s5", "flagged_parcels")},
        )
        schema = _schema(SchemaField("region", "string", enum=(region,)), SchemaField("parcel_id_list", "parcel_id_list"))
        checker = CheckerConfig(
            physical=PhysicalCheck(),
            spatial=SpatialCheck("parcel_id_list", tuple(truth), tuple(members), 0.5),
        )
        q = (
            f"Which parcels in region {region} show NDVI anomalies (|z| > {thr:g}) after the baseline "
            f"window days {baseline[0]}-{baseline[1]}?"
        )
        b = self.base_bindings(
            region=region, band="ndvi", time_range=list(analysis), baseline_window=list(baseline), thresholds={"z": thr}
        )
        return self.task(tid, "anomaly", "ndvi", q, b, schema, checker, plan, alignment=self._policy())

    # -- counterfactual ----------------------------------------------------

    def counterfactual(self, tid: str) -> TaskInstance:
        p = self.pick(self.pids)
        s0, s1 = self.season
        n = s1 - s0 + 1
        w0 = s0 + int(self.rng.integers(0, n // 3))
        w1 = min(s1, w0 + int(self.rng.integers(n // 4, n // 2)))
        lo, hi = IRRIGATION_BOUNDS
        sweep = []
        for m in np.linspace(lo, hi, SWEEP_POINTS):
            iv = Intervention("irrigation_delta", Quantity(round(float(m), 6), "mm_per_day"), (w0, w1))
            d, _, _ = sim_delta(self.world, p, iv, "stress_index")
            sweep.append((float(iv.magnitude.value), d))
        best = min(d for _, d in sweep)
        if best > -0.02:
            raise _Resample("no intervention in bounds reduces stress enough")
        big_delta = round(0.5 * -best, 4)
        magnitude = next(m for m, d in sweep if d <= -big_delta)
        iv = {"action": "irrigation_delta", "magnitude": {"value": magnitude, "unit": "mm_per_day"}, "window": [w0, w1]}
        plan = _plan(
            [("s1", "sim.delta", {"parcel_id": p, "intervention": iv, "target": "stress_index"})],
            {
                "parcel_id": p,
                "action": "irrigation_delta",
                "magnitude": ref("s1", "intervention.magnitude"),
                "window_start": ref("s1", "intervention.window.0"),
                "window_end": ref("s1", "intervention.window.1"),
                "delta": ref("s1", "delta"),
            },
        )
        schema = _schema(
            SchemaField("parcel_id", "string", enum=(p,)),
            SchemaField("action", "string", enum=("irrigation_delta",)),
            SchemaField("magnitude", "quantity", unit="mm_per_day"),
            SchemaField("window_start", "number"),
            SchemaField("window_end", "number"),
            SchemaField("delta", "number"),
        )
        checker = CheckerConfig(
            physical=PhysicalCheck(),
            counterfactual=CounterfactualCheck(big_delta, "stress_index", (lo, hi)),
        )
        q = (
            f"Find extra daily irrigation (between {lo:g} and {hi:g} mm/day, applied on days {w0}-{w1}) that lowers "
            f"the season stress index of parcel {p} by at least {big_delta:g}."
        )
        b = self.base_bindings(
            parcel_id=p, action="irrigation_delta", magnitude_bounds=[lo, hi], window_bounds=[w0, w1],
            thresholds={"delta": big_delta}, target="stress_index",
        )
        sealed = Intervention.from_json(iv)
        return self.task(tid, "counterfactual", "irrigation", q, b, schema, checker, plan, intervention=sealed)

    # -- helpers -----------------------------------------------------------

    def _numeric_stub(self, unit: str) -> CheckerConfig:
        # the reference value is sealed after the reference run
        return CheckerConfig(physical=PhysicalCheck(required_units={"value": unit}), numeric=NumericCheck("value", Quantity(0.0, unit)))

    def _policy(self) -> AlignmentPolicy:
        return AlignmentPolicy(target_crs=self.raster.crs, interp="linear", extrapolation="hold")


class _Resample(Exception):
    pass


def _seal(task: TaskInstance, world: WorldState) -> TaskInstance:
    """Run the reference, seal numeric references, and confirm ``z = 1``."""
    answer, artifacts = run_reference(task, world)
    if task.checker.numeric is not None:
        num = task.checker.numeric
        sealed = NumericCheck(num.key, Quantity(float(answer[num.key]), num.reference.unit), num.rel_tol, num.abs_tol)
        cfg = CheckerConfig(task.checker.physical, sealed, task.checker.counterfactual, task.checker.spatial)
        task = dataclasses.replace(task, checker=cfg)
    report = check(answer, artifacts, task, world)
    if report.z != 1:
        raise _Resample(f"reference answer rejected: {[v.code for v in report.violations]}")
    return task


_MAKERS: dict[str, tuple[Callable[[_Builder, str], TaskInstance], ...]] = {
    "lookup": (_Builder.lookup_ndvi, _Builder.lookup_soil),
    "forecast": (_Builder.forecast_yield, _Builder.forecast_gdd),
    "anomaly": (_Builder.anomaly,),
    "counterfactual": (_Builder.counterfactual,),
}


def gen_tasks(
    world: WorldState,
    cfg: Optional[GenConfig] = None,
    *,
    families: Optional[tuple[str, ...]] = None,
    per_family: Optional[int] = None,
    seed: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
) -> list[TaskInstance]:
    """``per_family`` tasks for each family, each validated by its own reference run."""
    cfg = cfg or GenConfig()
    fams = tuple(families if families is not None else cfg.families)
    unknown = [f for f in fams if f not in FAMILIES]
    if unknown:
        raise UnknownVariant(f"unknown task family {unknown}", path="families", observed=unknown, expected=list(FAMILIES))
    count = per_family if per_family is not None else cfg.tasks_per_family
    builder = _Builder(world, cfg.seed if seed is None else seed, budget)
    tasks: list[TaskInstance] = []
    for fam in FAMILIES:
        if fam not in fams:
            continue
        makers = _MAKERS[fam]
        for i in range(count):
            make = makers[i % len(makers)]
            tid = f"{fam}-{i + 1:03d}"
            for _ in range(MAX_ATTEMPTS):
                try:
                    tasks.append(_seal(make(builder, tid), world))
                    break
                except (_Resample, AgroError):
                    continue
            else:
                raise GenerationExhausted(
                    f"family {fam}: no valid task after {MAX_ATTEMPTS} attempts", path="families", observed=fam
                )
    return tasks


def reference_truth(task: TaskInstance) -> Any:
    """Sealed ground truth used by the metrics: y*, the reference mask, or Delta."""
    if task.checker.numeric is not None:
        return task.checker.numeric.reference.value
    if task.checker.spatial is not None:
        return list(task.checker.spatial.reference_mask)
    if task.checker.counterfactual is not None:
        return task.checker.counterfactual.delta
    return None


__all__ = ["gen_tasks", "reference_truth"]
