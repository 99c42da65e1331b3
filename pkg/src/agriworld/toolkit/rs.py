"""Remote-sensing analytics: raster views, robust zonal statistics, anomalies."""

from __future__ import annotations

import math
from typing import Any

from ..canonical import encode_real
from ..errors import ArgumentError, EmptyBaseline, LowCoverageError, UnknownRegion
from ..model import RasterTimeSeries, WorldState
from .common import check_window, geometries, parcel_ids, window, zone
from .registry import Param, ToolContext, ToolOutput, tool

STATS = ("mean", "min", "max", "count")
DEFAULT_TAU_MIN = 0.3


def _raster_from_view(world: WorldState, view: dict[str, Any]) -> tuple[RasterTimeSeries, str, list[int]]:
    try:
        raster = world.rasters[view["raster_id"]]
        band = view["band"]
        stamps = [int(t) for t in view["timestamps"]]
    except (KeyError, TypeError):
        raise ArgumentError("raster_ts must be a view produced by rs.load", path="raster_ts") from None
    raster.band(band)
    missing = sorted(set(stamps) - set(raster.timestamps))
    if missing:
        raise ArgumentError("raster_ts lists timestamps the raster lacks", path="raster_ts", observed=missing)
    return raster, band, stamps


@tool(
    "rs.load",
    index=Param("str", data=True),
    time_range=Param("window"),
    region=Param("any", required=False),
)
def load(ctx: ToolContext, index, time_range, region=None) -> ToolOutput:
    """Time-sliced view (header only) of the raster carrying band ``index``."""
    world = ctx.world
    raster = world.raster_with_band(index)
    t0, t1 = window(time_range)
    check_window((t0, t1), (raster.timestamps[0], raster.timestamps[-1]), f"rs.load({index})")
    stamps = [t for t in raster.timestamps if t0 <= t <= t1]
    if isinstance(region, str):
        if region not in world.regions():
            raise UnknownRegion(f"unknown region {region!r}", path="region", observed=region, expected=world.regions())
    elif region is not None:
        region = parcel_ids(world, region)
    header = raster.grid_header()
    header.update(
        {
            "raster_id": raster.id,
            "band": index,
            "timestamps": stamps,
            "time_range": [t0, t1],
            "region": region,
            "unit": raster.units[index],
        }
    )
    return ToolOutput(
        "series",
        header,
        {
            "unit": raster.units[index],
            "crs": raster.crs.to_json(),
            "resolution": list(raster.pixel_size),
            "t_range": [t0, t1],
        },
    )


def zonal_table(ctx: ToolContext, raster_ts: dict, parcels: Any, stat: str, tau_min: float) -> dict[str, Any]:
    world = ctx.world
    raster, band, stamps = _raster_from_view(world, raster_ts)
    values_all = raster.band(band)
    index_of = {t: i for i, t in enumerate(raster.timestamps)}
    ids, values, validity, pixels, summary = [], {}, {}, {}, {}
    min_nu = 1.0
    for pid, poly in geometries(world, parcels):
        ctx.require_aligned(poly.crs, raster.crs, path="parcels")
        rows, cols = zone(raster, poly, pid)
        n_zone = int(rows.size)
        series = []
        nus = []
        for t in stamps:
            ti = index_of[t]
            m = raster.mask[ti, rows, cols]
            r = values_all[ti, rows, cols]
            n_valid = int(m.sum())
            nu = n_valid / n_zone
            if nu < tau_min or n_valid == 0:
                raise LowCoverageError(
                    f"validity ratio {nu:.4f} below tau_min {tau_min} for parcel {pid} at t={t}",
                    path="parcels",
                    observed=nu,
                    expected=tau_min,
                    parcel=pid,
                    t=t,
                    nu=nu,
                    tau_min=tau_min,
                )
            valid = [float(x) for x in r[m == 1]]
            if stat == "mean":
                v = math.fsum(valid) / n_valid
            elif stat == "min":
                v = min(valid)
            elif stat == "max":
                v = max(valid)
            else:
                v = float(n_valid)
            series.append(v)
            nus.append(nu)
            min_nu = min(min_nu, nu)
        ids.append(pid)
        values[pid] = series
        validity[pid] = nus
        pixels[pid] = n_zone
        summary[pid] = math.fsum(series) / len(series) if series else None
    return {
        "raster": raster,
        "payload": {
            "parcel_ids": ids,
            "timestamps": stamps,
            "stat": stat,
            "band": band,
            "values": values,
            "validity": validity,
            "pixels": pixels,
            "summary": summary,
        },
        "min_nu": min_nu,
    }


@tool(
    "rs.zonal_stats",
    raster_ts=Param("raster", data=True),
    parcels=Param("parcels", data=True),
    stat=Param("str", False, "mean"),
    tau_min=Param("number", False, DEFAULT_TAU_MIN),
)
def zonal_stats(ctx: ToolContext, raster_ts, parcels, stat="mean", tau_min=DEFAULT_TAU_MIN) -> ToolOutput:
    """Per parcel and timestamp: masked mean (or min/max/count) and validity ratio."""
    if stat not in STATS:
        raise ArgumentError(f"unsupported stat {stat!r}", path="stat", observed=stat, expected=list(STATS))
    if not 0.0 <= float(tau_min) <= 1.0:
        raise ArgumentError("tau_min must be in [0, 1]", path="tau_min", observed=tau_min)
    res = zonal_table(ctx, raster_ts, parcels, stat, float(tau_min))
    raster = res["raster"]
    payload = res["payload"]
    meta = {
        "unit": "dimensionless" if stat == "count" else raster.units[payload["band"]],
        "crs": raster.crs.to_json(),
        "resolution": list(raster.pixel_size),
        "validity_ratio": res["min_nu"],
    }
    if len(payload["parcel_ids"]) == 1:
        meta["headline"] = f"summary.{payload['parcel_ids'][0]}"
    return ToolOutput("table", payload, meta)


def zscores(
    t: list[int], x: list[Any], baseline_window: tuple[int, int], threshold: float
) -> dict[str, Any]:
    b0, b1 = baseline_window
    base = [float(v) for ti, v in zip(t, x) if b0 <= ti <= b1 and v is not None]
    if len(base) < 2:
        raise EmptyBaseline(
            f"baseline window ({b0}, {b1}) holds {len(base)} samples, need >= 2",
            path="baseline_window",
            observed=[b0, b1],
            expected=[t[0], t[-1]] if t else None,
        )
    mean = math.fsum(base) / len(base)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in base) / len(base))
    scores, flagged, days = [], [], []
    for ti, v in zip(t, x):
        if v is None:
            scores.append(None)
            flagged.append(False)
            continue
        v = float(v)
        if std > 0.0:
            s = (v - mean) / std
        elif v == mean:
            s = 0.0
        else:
            s = math.inf if v > mean else -math.inf
        f = abs(s) > threshold
        scores.append(encode_real(s))
        flagged.append(f)
        if f and not b0 <= ti <= b1:
            days.append(ti)
    return {
        "t": list(t),
        "score": scores,
        "flagged": flagged,
        "flagged_days": days,
        "baseline": {"window": [b0, b1], "mean": mean, "std": std, "n": len(base)},
    }


@tool(
    "rs.anomaly",
    ts=Param("dict", data=True),
    baseline_window=Param("window"),
    method=Param("str", False, "zscore"),
    threshold=Param("number", False, 2.5),
)
def anomaly(ctx: ToolContext, ts, baseline_window, method="zscore", threshold=2.5) -> ToolOutput:
    """Z-score anomalies of a series, or of every parcel row of a zonal table.

    Uses the population standard deviation of the baseline. A zero-spread
    baseline scores ``+inf``/``-inf`` sentinels for any deviation.
    """
    if method != "zscore":
        raise ArgumentError(f"unsupported method {method!r}", path="method", observed=method, expected=["zscore"])
    bw = window(baseline_window, "baseline_window")
    thr = float(threshold)
    if "parcel_ids" in ts and "timestamps" in ts and "values" in ts:
        per = {pid: zscores(list(ts["timestamps"]), list(ts["values"][pid]), bw, thr) for pid in ts["parcel_ids"]}
        payload = {
            "parcels": per,
            "flagged_parcels": sorted(pid for pid, r in per.items() if r["flagged_days"]),
            "threshold": thr,
        }
        meta = {"unit": "dimensionless", "headline": "flagged_parcels"}
        return ToolOutput("table", payload, meta)
    if "t" in ts and "values" in ts:
        payload = zscores(list(ts["t"]), list(ts["values"]), bw, thr)
        payload["threshold"] = thr
        return ToolOutput("series", payload, {"unit": "dimensionless", "headline": "flagged_days"})
    raise ArgumentError("ts must be a series payload or a zonal table", path="ts")
