"""Seeded synthetic world generator.

One ``numpy`` PCG64 stream per seed, consumed in a fixed order: layout,
parcels, soil grid, NDVI raster, weather, management logs. The same
``GenConfig`` therefore yields a byte-identical bundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..align import reproject_point, reproject_polygon
from ..errors import InvariantError
from ..model import (
    CROP_TYPES,
    WEATHER_VARS,
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
from ..toolkit.common import zone
from ..units import Quantity

FAMILIES = ("lookup", "forecast", "anomaly", "counterfactual")
CELL_M = 650.0
RASTER_PX_M = 50.0
GRID_PX_M = 100.0
RASTER_STEP_DAYS = 5
MARGIN_M = 300.0
DIP = -0.25


@dataclass(frozen=True)
class GenConfig:
    seed: int = 42
    n_parcels: int = 50
    # (lon_min, lat_min, lon_max, lat_max) box the world center is drawn from
    extent: tuple[float, float, float, float] = (-100.0, 25.0, 40.0, 55.0)
    season_days: int = 120
    cloud_prob: float = 0.25
    families: tuple[str, ...] = FAMILIES
    tasks_per_family: int = 50

    def __post_init__(self) -> None:
        if self.n_parcels < 1:
            raise InvariantError("n_parcels must be >= 1", path="n_parcels", observed=self.n_parcels)
        if not 0.0 <= self.cloud_prob < 1.0:
            raise InvariantError("cloud_prob must be in [0, 1)", path="cloud_prob", observed=self.cloud_prob)
        if self.season_days < 30:
            raise InvariantError("season_days must be >= 30", path="season_days", observed=self.season_days)
        if not 0 <= self.seed < 2**64:
            raise InvariantError("seed must be an unsigned 64-bit integer", path="seed", observed=self.seed)
        bad = sorted(set(self.families) - set(FAMILIES))
        if bad:
            raise InvariantError("unknown task families", path="families", observed=bad, expected=list(FAMILIES))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))


@dataclass(frozen=True)
class ParcelTruth:
    """Hidden generation parameters of one parcel's NDVI signal."""

    t_mid: float
    k: float
    base: float
    amp: float
    dip_days: tuple[int, ...] = field(default=())


def season_of(cfg: GenConfig) -> tuple[int, int]:
    return (1, cfg.season_days)


def anomaly_windows(season: tuple[int, int], last_stamp: Optional[int] = None) -> tuple[tuple[int, int], tuple[int, int]]:
    """``(analysis window, baseline window)``; dips fall after the baseline.

    The analysis window runs to ``last_stamp`` (the final raster acquisition),
    defaulting to the season end.
    """
    s0, s1 = season
    n = s1 - s0 + 1
    b0 = s0 + int(round(0.55 * n))
    b1 = s0 + int(round(0.8 * n))
    return (b0, s1 if last_stamp is None else last_stamp), (b0, b1)


def _rect(cx: float, cy: float, w: float, h: float, angle: float) -> list[tuple[float, float]]:
    c, s = math.cos(angle), math.sin(angle)
    pts = []
    for dx, dy in ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)):
        pts.append((cx + dx * c - dy * s, cy + dx * s + dy * c))
    return pts


def gen_world(cfg: GenConfig) -> WorldState:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    season = season_of(cfg)
    s0, s1 = season
    n_days = s1 - s0 + 1

    lon_min, lat_min, lon_max, lat_max = cfg.extent
    lon_c = round(float(rng.uniform(lon_min, lon_max)), 4)
    lat_c = round(float(rng.uniform(lat_min, lat_max)), 4)
    metric = Crs.metric(lat_c)
    geo = Crs.geo()
    # METRIC coordinates are x = R cos(lat0) lon, y = R lat; offset the layout to the center
    cx0, cy0 = reproject_point((lon_c, lat_c), geo, metric)

    n = cfg.n_parcels
    ncols = int(math.ceil(math.sqrt(n)))
    nrows = int(math.ceil(n / ncols))
    n_regions = min(3, max(1, n // 15))

    parcels: dict[str, Parcel] = {}
    metric_rings: dict[str, list[tuple[float, float]]] = {}
    truths: dict[str, ParcelTruth] = {}
    for i in range(n):
        r, c = divmod(i, ncols)
        w, h = rng.uniform(300.0, 450.0, size=2)
        angle = math.radians(float(rng.uniform(-15.0, 15.0)))
        jx, jy = rng.uniform(-40.0, 40.0, size=2)
        px = cx0 + (c - (ncols - 1) / 2) * CELL_M + jx
        py = cy0 - (r - (nrows - 1) / 2) * CELL_M + jy
        ring = _rect(px, py, float(w), float(h), angle)
        pid = f"p{i + 1:03d}"
        metric_rings[pid] = ring
        ring_geo = tuple(reproject_point(pt, metric, geo) for pt in ring)
        crop = CROP_TYPES[int(rng.integers(len(CROP_TYPES)))]
        region = f"r{min(n_regions, c * n_regions // ncols + 1)}"
        parcels[pid] = Parcel(pid, Polygon((ring_geo,), geo), crop, region)
        truths[pid] = ParcelTruth(
            t_mid=s0 + n_days * float(rng.uniform(0.12, 0.2)),
            k=float(rng.uniform(3.0, 5.0)),
            base=float(rng.uniform(0.12, 0.2)),
            amp=float(rng.uniform(0.55, 0.7)),
        )

    # shared raster/grid frame covering every parcel
    xs = [x for ring in metric_rings.values() for x, _ in ring]
    ys = [y for ring in metric_rings.values() for _, y in ring]
    x0 = math.floor((min(xs) - MARGIN_M) / GRID_PX_M) * GRID_PX_M
    y_top = math.ceil((max(ys) + MARGIN_M) / GRID_PX_M) * GRID_PX_M
    span_x = math.ceil((max(xs) + MARGIN_M - x0) / GRID_PX_M) * GRID_PX_M
    span_y = math.ceil((y_top - (min(ys) - MARGIN_M)) / GRID_PX_M) * GRID_PX_M

    # soil water capacity: smooth random field rescaled into [80, 200] mm
    gw, gh = int(span_x / GRID_PX_M), int(span_y / GRID_PX_M)
    gx, gy = np.meshgrid(np.arange(gw) / max(gw, 1), np.arange(gh) / max(gh, 1))
    field_ = np.zeros((gh, gw))
    for _ in range(4):
        fx, fy = rng.uniform(0.5, 2.5, size=2)
        ph = rng.uniform(0.0, 2 * math.pi)
        field_ += np.sin(2 * math.pi * (fx * gx + fy * gy) + ph)
    field_ += rng.normal(0.0, 0.3, size=field_.shape)
    lo, hi = field_.min(), field_.max()
    soil = np.round(80.0 + 120.0 * (field_ - lo) / (hi - lo if hi > lo else 1.0), 2)
    soil = np.clip(soil, 80.0, 200.0)
    grid = GridField("soil", metric, (x0, y_top), (GRID_PX_M, GRID_PX_M), gw, gh, soil, "mm", "soil_water_capacity")

    # NDVI raster
    rw, rh = int(span_x / RASTER_PX_M), int(span_y / RASTER_PX_M)
    stamps = list(range(s0, s1 + 1, RASTER_STEP_DAYS))
    raster_frame = RasterTimeSeries(
        "ndvi", metric, (x0, y_top), (RASTER_PX_M, RASTER_PX_M), rw, rh, stamps[:1],
        {"ndvi": np.zeros((1, rh, rw))}, np.ones((1, rh, rw)), {"ndvi": "dimensionless"},
    )

    owner = np.full((rh, rw), -1, dtype=np.int64)
    pids = sorted(parcels)
    for k, pid in enumerate(pids):
        rows, cols = zone(raster_frame, reproject_polygon(parcels[pid].geometry, metric), pid)
        owner[rows, cols] = k
    baseline = anomaly_windows(season)[1]
    dip_candidates = [t for t in stamps if t > baseline[1]]
    for pid in pids:
        if dip_candidates and rng.uniform() < 0.2:
            start = int(rng.integers(len(dip_candidates)))
            days = tuple(dip_candidates[start : start + 2])
            truths[pid] = ParcelTruth(truths[pid].t_mid, truths[pid].k, truths[pid].base, truths[pid].amp, days)
    offsets = rng.normal(0.0, 0.004, size=(rh, rw))
    t_arr = np.array(stamps, dtype=float)
    signal = np.empty((len(stamps), rh, rw))
    background = 0.15 + 0.03 * np.sin(2 * math.pi * (t_arr - s0) / n_days)
    signal[:] = background[:, None, None]
    for k, pid in enumerate(pids):
        tr = truths[pid]
        curve = tr.base + tr.amp / (1.0 + np.exp(-(t_arr - tr.t_mid) / tr.k))
        # parcel-wide jitter dominates the cloud-subset noise of zonal means
        curve = curve + rng.normal(0.0, 0.01, size=curve.shape)
        for d in tr.dip_days:
            curve[stamps.index(d)] += DIP
        sel = owner == k
        signal[:, sel] = curve[:, None]
    signal += offsets[None, :, :]
    signal += rng.normal(0.0, 0.003, size=signal.shape)
    signal = np.round(np.clip(signal, -1.0, 1.0), 4)
    mask = (rng.uniform(size=signal.shape) >= cfg.cloud_prob).astype(np.uint8)
    raster = RasterTimeSeries(
        "ndvi", metric, (x0, y_top), (RASTER_PX_M, RASTER_PX_M), rw, rh, stamps,
        {"ndvi": signal}, mask, {"ndvi": "dimensionless"},
    )

    # weather: one stream per region
    weather = {}
    regions = sorted({p.region_id for p in parcels.values()})
    for region in regions:
        phase = float(rng.uniform(0.0, 2 * math.pi))
        recs = []
        for t in range(s0, s1 + 1):
            u = (t - s0) / n_days
            tmax = 24.0 + 6.0 * math.sin(math.pi * u) + 1.5 * math.sin(2 * math.pi * u * 3 + phase) + float(rng.normal(0, 1.5))
            tmin = tmax - float(rng.uniform(8.0, 12.0))
            precip = float(rng.exponential(12.0)) if rng.uniform() < 0.12 else 0.0
            et0 = max(0.5, 3.5 + 1.5 * math.sin(math.pi * u) + float(rng.normal(0, 0.5)))
            rh_ = min(100.0, max(20.0, 60.0 + 15.0 * math.sin(2 * math.pi * u + phase) + float(rng.normal(0, 8))))
            gap = s0 < t < s1 and rng.uniform() < 0.03
            if gap:
                continue
            vals = {"tmax_degC": tmax, "tmin_degC": tmin, "precip_mm": precip, "et0_mm": et0, "rh_pct": rh_}
            recs.append(WeatherRecord(t, {k: round(v, 2) for k, v in vals.items() if k in WEATHER_VARS}))
        weather[f"w_{region}"] = WeatherStream(f"w_{region}", region, tuple(recs))

    # management logs
    logs = {}
    for pid in pids:
        events = [ManagementEvent(s0, "sow", Quantity(1.0, "dimensionless"))]
        events.append(ManagementEvent(s0 + int(rng.integers(5, 20)), "fertilize", Quantity(round(float(rng.uniform(80, 180)), 1), "kg_per_ha")))
        if rng.uniform() < 0.5:
            for _ in range(int(rng.integers(1, 5))):
                t = s0 + int(rng.integers(10, n_days - 10))
                events.append(ManagementEvent(t, "irrigate", Quantity(round(float(rng.uniform(10, 30)), 1), "mm")))
        events.sort(key=lambda e: (e.t, e.action))
        logs[pid] = ManagementLog(pid, tuple(events))

    # sensor footprints: metric-CRS zones over a few parcels
    footprints = {}
    for i, pid in enumerate(pids[: min(3, len(pids))]):
        ring = metric_rings[pid]
        fx = sum(x for x, _ in ring) / 4
        fy = sum(y for _, y in ring) / 4
        fid = f"fp{i + 1:02d}"
        footprints[fid] = Parcel(fid, Polygon((tuple(_rect(fx, fy, 200.0, 200.0, 0.0)),), metric), None, parcels[pid].region_id)

    world_id = f"w{cfg.seed}-n{cfg.n_parcels}-d{cfg.season_days}-c{cfg.cloud_prob:g}"
    return WorldState(
        world_id,
        season,
        parcels,
        rasters={"ndvi": raster},
        grids={"soil": grid},
        weather=weather,
        logs=logs,
        footprints=footprints,
    )


def unmasked_zonal_means(world: WorldState, pids: list[str], t_range: tuple[int, int]) -> tuple[list[int], dict[str, list[float]]]:
    """Per-parcel zonal means of the NDVI signal ignoring clouds (generation-time truth)."""
    raster = world.raster_with_band("ndvi")
    band = raster.band("ndvi")
    idx = [i for i, t in enumerate(raster.timestamps) if t_range[0] <= t <= t_range[1]]
    out = {}
    for pid in pids:
        poly = reproject_polygon(world.parcels[pid].geometry, raster.crs)
        rows, cols = zone(raster, poly, pid)
        out[pid] = [math.fsum(float(v) for v in band[i, rows, cols]) / rows.size for i in idx]
    return [raster.timestamps[i] for i in idx], out
