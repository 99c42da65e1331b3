"""Small hand-built worlds shared by the unit tests."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from agriworld.model import (
    Crs,
    GridField,
    ManagementEvent,
    ManagementLog,
    Parcel,
    Polygon,
    RasterTimeSeries,
    WeatherRecord,
    WeatherStream,
    WorldState,
)
from agriworld.units import Quantity

M0 = Crs.metric(0.0)


def rect(x0: float, y0: float, x1: float, y1: float) -> list[tuple[float, float]]:
    """Counter-clockwise axis-aligned rectangle."""
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def parcel(pid: str, ring: Sequence[tuple[float, float]], crs: Crs = M0, region: str = "r1", crop: str = "maize") -> Parcel:
    return Parcel(pid, Polygon((tuple(ring),), crs), crop, region)


def raster(
    values: np.ndarray,
    mask: Optional[np.ndarray] = None,
    *,
    px: float = 1.0,
    origin: Optional[tuple[float, float]] = None,
    crs: Crs = M0,
    timestamps: Optional[Sequence[int]] = None,
    band: str = "ndvi",
    rid: str = "r_ndvi",
) -> RasterTimeSeries:
    """Raster whose lower-left corner sits at (0, 0) unless ``origin`` says otherwise."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    t, h, w = values.shape
    mask = np.ones_like(values, dtype=np.uint8) if mask is None else np.asarray(mask).reshape(values.shape)
    return RasterTimeSeries(
        rid,
        crs,
        origin if origin is not None else (0.0, h * px),
        (px, px),
        w,
        h,
        tuple(timestamps) if timestamps is not None else tuple(range(1, t + 1)),
        {band: values},
        mask,
        {band: "dimensionless"},
    )


def soil_grid(values, *, px: float = 1.0, crs: Crs = M0, gid: str = "g_soil") -> GridField:
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    return GridField(gid, crs, (0.0, h * px), (px, px), w, h, values, "mm", "soil_water_capacity")


def weather(
    days: Sequence[int],
    *,
    precip: Sequence[float],
    et0: Sequence[float],
    tmax: Optional[Sequence[float]] = None,
    tmin: Optional[Sequence[float]] = None,
    rh: Optional[Sequence[float]] = None,
    region: str = "r1",
    wid: str = "wx_r1",
) -> WeatherStream:
    n = len(days)
    tmax = tmax if tmax is not None else [25.0] * n
    tmin = tmin if tmin is not None else [12.0] * n
    rh = rh if rh is not None else [60.0] * n
    recs = [
        WeatherRecord(t, {"precip_mm": p, "et0_mm": e, "tmax_degC": a, "tmin_degC": b, "rh_pct": h})
        for t, p, e, a, b, h in zip(days, precip, et0, tmax, tmin, rh)
    ]
    return WeatherStream(wid, region, tuple(recs))


def irrigation_log(pid: str, events: dict[int, float]) -> ManagementLog:
    return ManagementLog(pid, tuple(ManagementEvent(t, "irrigate", Quantity(v, "mm")) for t, v in sorted(events.items())))


def world(
    parcels: Sequence[Parcel],
    *,
    rasters: Sequence[RasterTimeSeries] = (),
    grids: Sequence[GridField] = (),
    weathers: Sequence[WeatherStream] = (),
    logs: Sequence[ManagementLog] = (),
    footprints: Sequence[Parcel] = (),
    season: tuple[int, int] = (1, 30),
    world_id: str = "toy",
) -> WorldState:
    return WorldState(
        world_id,
        season,
        {p.id: p for p in parcels},
        {r.id: r for r in rasters},
        {g.id: g for g in grids},
        {w.id: w for w in weathers},
        {lg.parcel_id: lg for lg in logs},
        {f.id: f for f in footprints},
    )


def sim_world(
    *,
    capacity: float = 150.0,
    precip: Sequence[float],
    et0: Sequence[float],
    irrigation: Optional[dict[int, float]] = None,
    crop: str = "maize",
) -> WorldState:
    """One 10x10 m parcel on a uniform capacity grid, season 1..len(precip)."""
    n = len(precip)
    p = parcel("p1", rect(2.0, 2.0, 8.0, 8.0), crop=crop)
    return world(
        [p],
        grids=[soil_grid(np.full((10, 10), capacity))],
        weathers=[weather(list(range(1, n + 1)), precip=precip, et0=et0)],
        logs=[irrigation_log("p1", irrigation)] if irrigation else [],
        season=(1, n),
    )


def hand_trace(capacity: float, precip: Sequence[float], et0: Sequence[float], irrigation: Sequence[float]):
    """Spreadsheet-style bucket recurrence; returns (soil per day, stress per day).

    Crop coefficient by season third: 0.4, 1.0, 0.7. Start at half capacity.
    """
    n = len(precip)
    third = [0.4 if 3 * i < n else 1.0 if 3 * i < 2 * n else 0.7 for i in range(n)]
    soil, stress = [], []
    s = capacity / 2
    for i in range(n):
        soil.append(s)
        stress.append(max(0.0, 1.0 - s / (capacity / 2)))
        s = min(capacity, max(0.0, s + precip[i] + irrigation[i] - third[i] * et0[i]))
    return soil, stress
