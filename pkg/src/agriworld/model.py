"""Typed state space: parcels, raster time series, grid fields, weather, logs.

All entities are frozen; numpy arrays are marked read-only and keyed
collections are exposed as read-only mappings, so a loaded
:class:`WorldState` cannot be mutated by tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Optional

import numpy as np

from . import geometry
from .errors import InvariantError, UnknownBand, UnknownParcel, UnknownRegion
from .units import Quantity, is_unit

CROP_TYPES = ("maize", "wheat", "soy", "rice")
GRID_NAMES = ("soil_water_capacity", "elevation", "clay_fraction")
ACTIONS = ("irrigate", "fertilize", "sow", "harvest")
WEATHER_VARS = {
    "precip_mm": "mm",
    "et0_mm": "mm",
    "tmax_degC": "degC",
    "tmin_degC": "degC",
    "rh_pct": "dimensionless",
}


@dataclass(frozen=True)
class Crs:
    kind: str
    lat0: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == "GEO":
            if self.lat0 is not None:
                raise InvariantError("GEO crs takes no lat0", path="lat0", observed=self.lat0)
        elif self.kind == "METRIC":
            if self.lat0 is None or not -90.0 <= float(self.lat0) <= 90.0:
                raise InvariantError("METRIC lat0 must be in [-90, 90]", path="lat0", observed=self.lat0)
            object.__setattr__(self, "lat0", float(self.lat0))
        else:
            raise InvariantError(f"unknown crs kind {self.kind!r}", path="kind", observed=self.kind)

    @classmethod
    def geo(cls) -> "Crs":
        return cls("GEO")

    @classmethod
    def metric(cls, lat0: float) -> "Crs":
        return cls("METRIC", float(lat0))

    def to_json(self) -> dict[str, Any]:
        if self.kind == "GEO":
            return {"kind": "GEO"}
        return {"kind": "METRIC", "lat0": self.lat0}

    @classmethod
    def from_json(cls, obj: Any) -> "Crs":
        if isinstance(obj, Crs):
            return obj
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvariantError("crs must be an object with a 'kind' key", observed=obj)
        return cls(obj["kind"], obj.get("lat0"))

    def __str__(self) -> str:
        return "GEO" if self.kind == "GEO" else f"METRIC({self.lat0:g})"


@dataclass(frozen=True)
class Polygon:
    rings: tuple[tuple[tuple[float, float], ...], ...]
    crs: Crs

    def __post_init__(self) -> None:
        rings = tuple(tuple((float(x), float(y)) for x, y in ring) for ring in self.rings)
        object.__setattr__(self, "rings", rings)
        if len(rings) != 1:
            raise InvariantError("polygon must have exactly one (exterior) ring", path="rings", observed=len(rings))
        ring = rings[0]
        if len(ring) < 3:
            raise InvariantError("ring needs at least 3 vertices", path="rings[0]", observed=len(ring))
        for x, y in ring:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InvariantError("vertex coordinates must be finite", path="rings[0]")
            if self.crs.kind == "GEO" and not (-180.0 <= x <= 180.0 and -90.0 <= y <= 90.0):
                raise InvariantError("GEO vertex outside lon/lat range", path="rings[0]", observed=[x, y])
        if geometry.signed_area(ring) <= 0:
            raise InvariantError("exterior ring must be counter-clockwise with positive area", path="rings[0]")
        if not geometry.is_simple(ring):
            raise InvariantError("ring must be simple (non-self-intersecting)", path="rings[0]")

    @property
    def exterior(self) -> tuple[tuple[float, float], ...]:
        return self.rings[0]

    def area(self) -> float:
        """Shoelace area in CRS units squared."""
        return geometry.signed_area(self.exterior)

    def to_json(self) -> dict[str, Any]:
        return {"rings": [[[x, y] for x, y in r] for r in self.rings], "crs": self.crs.to_json()}

    @classmethod
    def from_json(cls, obj: Any) -> "Polygon":
        return cls(tuple(tuple((p[0], p[1]) for p in r) for r in obj["rings"]), Crs.from_json(obj["crs"]))


@dataclass(frozen=True)
class Parcel:
    id: str
    geometry: Polygon
    crop_type: Optional[str]
    region_id: str
    attributes: Mapping[str, Quantity] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.crop_type is not None and self.crop_type not in CROP_TYPES:
            raise InvariantError(f"parcel {self.id}: unknown crop_type", path="crop_type", observed=self.crop_type)
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "geometry": self.geometry.to_json(),
            "crop_type": self.crop_type,
            "region_id": self.region_id,
            "attributes": {k: v.to_json() for k, v in sorted(self.attributes.items())},
        }

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Parcel) and self.to_json() == other.to_json()

    def __hash__(self) -> int:
        return hash(self.id)


def _frozen_array(a: Any, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


class _GridHeader:
    """Shared north-up grid geometry; ``origin`` is the upper-left corner."""

    crs: Crs
    origin: tuple[float, float]
    pixel_size: tuple[float, float]
    width: int
    height: int

    def _check_header(self, what: str) -> None:
        dx, dy = self.pixel_size
        if not (dx > 0 and dy > 0):
            raise InvariantError(f"{what}: pixel_size must be positive", path="pixel_size", observed=list(self.pixel_size))
        if not (isinstance(self.width, int) and isinstance(self.height, int) and self.width > 0 and self.height > 0):
            raise InvariantError(f"{what}: width/height must be positive integers", path="width")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0 = self.origin
        dx, dy = self.pixel_size
        cols = x0 + (np.arange(self.width) + 0.5) * dx
        rows = y0 - (np.arange(self.height) + 0.5) * dy
        xs, ys = np.meshgrid(cols, rows)
        return xs, ys

    def grid_header(self) -> dict[str, Any]:
        return {
            "crs": self.crs.to_json(),
            "origin": [self.origin[0], self.origin[1]],
            "pixel_size": [self.pixel_size[0], self.pixel_size[1]],
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True, eq=False)
class RasterTimeSeries(_GridHeader):
    id: str
    crs: Crs
    origin: tuple[float, float]
    pixel_size: tuple[float, float]
    width: int
    height: int
    timestamps: tuple[int, ...]
    bands: Mapping[str, np.ndarray]
    mask: np.ndarray
    units: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "pixel_size", (float(self.pixel_size[0]), float(self.pixel_size[1])))
        object.__setattr__(self, "timestamps", tuple(int(t) for t in self.timestamps))
        self._check_header(f"raster {self.id}")
        ts = self.timestamps
        if not ts or any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvariantError(f"raster {self.id}: timestamps must be strictly increasing", path="timestamps")
        shape = (len(ts), self.height, self.width)
        mask = _frozen_array(self.mask, np.int64)
        if mask.shape != shape:
            raise InvariantError(f"raster {self.id}: mask shape {mask.shape} != {shape}", path="mask")
        if not np.isin(mask, (0, 1)).all():
            raise InvariantError(f"raster {self.id}: mask entries must be 0 or 1", path="mask")
        object.__setattr__(self, "mask", mask.astype(np.uint8))
        self.mask.setflags(write=False)
        bands = {}
        for name, arr in self.bands.items():
            a = _frozen_array(arr, np.float64)
            if a.shape != shape:
                raise InvariantError(f"raster {self.id}: band {name} shape {a.shape} != {shape}", path=f"bands.{name}")
            if not np.isfinite(a).all():
                raise InvariantError(f"raster {self.id}: band {name} has non-finite values", path=f"bands.{name}")
            if not is_unit(self.units.get(name)):
                raise InvariantError(f"raster {self.id}: band {name} needs a unit", path=f"units.{name}")
            bands[name] = a
        if not bands:
            raise InvariantError(f"raster {self.id}: at least one band required", path="bands")
        object.__setattr__(self, "bands", MappingProxyType(bands))
        object.__setattr__(self, "units", MappingProxyType(dict(self.units)))

    def band(self, name: str) -> np.ndarray:
        if name not in self.bands:
            raise UnknownBand(
                f"raster {self.id} has no band {name!r}", path="index", observed=name, expected=sorted(self.bands)
            )
        return self.bands[name]

    def header(self) -> dict[str, Any]:
        h = self.grid_header()
        h.update({"id": self.id, "timestamps": list(self.timestamps), "units": dict(sorted(self.units.items()))})
        return h

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterTimeSeries):
            return NotImplemented
        return (
            self.header() == other.header()
            and sorted(self.bands) == sorted(other.bands)
            and all(np.array_equal(self.bands[k], other.bands[k]) for k in self.bands)
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class GridField(_GridHeader):
    id: str
    crs: Crs
    origin: tuple[float, float]
    pixel_size: tuple[float, float]
    width: int
    height: int
    values: np.ndarray
    unit: str
    name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "pixel_size", (float(self.pixel_size[0]), float(self.pixel_size[1])))
        self._check_header(f"grid {self.id}")
        if self.name not in GRID_NAMES:
            raise InvariantError(f"grid {self.id}: unknown grid name", path="name", observed=self.name)
        if not is_unit(self.unit):
            raise InvariantError(f"grid {self.id}: unknown unit", path="unit", observed=self.unit)
        values = _frozen_array(self.values, np.float64)
        if values.shape != (self.height, self.width):
            raise InvariantError(f"grid {self.id}: values shape mismatch", path="values")
        if not np.isfinite(values).all():
            raise InvariantError(f"grid {self.id}: values must be finite", path="values")
        if self.name == "soil_water_capacity" and not (values > 0).all():
            raise InvariantError(f"grid {self.id}: soil_water_capacity must be > 0", path="values")
        object.__setattr__(self, "values", values)

    def header(self) -> dict[str, Any]:
        h = self.grid_header()
        h.update({"id": self.id, "unit": self.unit, "name": self.name})
        return h

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridField):
            return NotImplemented
        return self.header() == other.header() and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class WeatherRecord:
    t: int
    vars: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", MappingProxyType({k: float(v) for k, v in self.vars.items()}))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WeatherRecord) and self.t == other.t and dict(self.vars) == dict(other.vars)

    def __hash__(self) -> int:
        return hash(self.t)


@dataclass(frozen=True)
class WeatherStream:
    id: str
    region_id: str
    records: tuple[WeatherRecord, ...]

    def __post_init__(self) -> None:
        recs = tuple(r if isinstance(r, WeatherRecord) else WeatherRecord(int(r[0]), r[1]) for r in self.records)
        object.__setattr__(self, "records", recs)
        if not recs:
            raise InvariantError(f"weather {self.id}: no records", path="records")
        for a, b in zip(recs, recs[1:]):
            if b.t <= a.t:
                raise InvariantError(f"weather {self.id}: t must be strictly increasing", path="records", observed=b.t)
        for r in recs:
            v = r.vars
            if set(v) != set(WEATHER_VARS):
                raise InvariantError(
                    f"weather {self.id}: record t={r.t} must carry exactly {sorted(WEATHER_VARS)}",
                    path=f"records[t={r.t}]",
                    observed=sorted(v),
                )
            if not all(math.isfinite(x) for x in v.values()):
                raise InvariantError(f"weather {self.id}: non-finite value at t={r.t}", path=f"records[t={r.t}]")
            if v["tmax_degC"] < v["tmin_degC"]:
                raise InvariantError(f"weather {self.id}: tmax < tmin at t={r.t}", path=f"records[t={r.t}].tmax_degC")
            if v["precip_mm"] < 0 or v["et0_mm"] < 0:
                raise InvariantError(f"weather {self.id}: negative precip/et0 at t={r.t}", path=f"records[t={r.t}]")
            if not 0 <= v["rh_pct"] <= 100:
                raise InvariantError(f"weather {self.id}: rh outside [0, 100] at t={r.t}", path=f"records[t={r.t}].rh_pct")

    def series(self, var: str) -> list[tuple[int, float]]:
        return [(r.t, r.vars[var]) for r in self.records]


@dataclass(frozen=True)
class ManagementEvent:
    t: int
    action: str
    q: Quantity


@dataclass(frozen=True)
class ManagementLog:
    parcel_id: str
    events: tuple[ManagementEvent, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if e.action not in ACTIONS:
                raise InvariantError(f"log {self.parcel_id}: unknown action", path="events.action", observed=e.action)
            if e.action == "irrigate" and e.q.unit != "mm":
                raise InvariantError(f"log {self.parcel_id}: irrigate quantity must be in mm", path="events.q", observed=e.q.unit)
            if e.action == "fertilize" and e.q.unit != "kg_per_ha":
                raise InvariantError(
                    f"log {self.parcel_id}: fertilize quantity must be in kg_per_ha", path="events.q", observed=e.q.unit
                )

    def irrigation_by_day(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for e in self.events:
            if e.action == "irrigate":
                out[e.t] = out.get(e.t, 0.0) + e.q.value
        return out


def _proxy(items: Mapping[str, Any] | None) -> Mapping[str, Any]:
    return MappingProxyType(dict(sorted((items or {}).items())))


@dataclass(frozen=True)
class WorldState:
    """Immutable snapshot of one world. Footprints are parcel-typed sensor zones."""

    world_id: str
    season: tuple[int, int]
    parcels: Mapping[str, Parcel]
    rasters: Mapping[str, RasterTimeSeries] = field(default_factory=dict)
    grids: Mapping[str, GridField] = field(default_factory=dict)
    weather: Mapping[str, WeatherStream] = field(default_factory=dict)
    logs: Mapping[str, ManagementLog] = field(default_factory=dict)
    footprints: Mapping[str, Parcel] = field(default_factory=dict)

    def __post_init__(self) -> None:
        t0, t1 = int(self.season[0]), int(self.season[1])
        if t1 < t0:
            raise InvariantError(f"world {self.world_id}: season end before start", path="season")
        object.__setattr__(self, "season", (t0, t1))
        for name in ("parcels", "rasters", "grids", "weather", "logs", "footprints"):
            object.__setattr__(self, name, _proxy(getattr(self, name)))
        for key, p in self.parcels.items():
            if key != p.id:
                raise InvariantError(f"parcel key {key} != id {p.id}", path="parcels")
            if p.crop_type is None:
                raise InvariantError(f"parcel {p.id}: crop_type required", path="crop_type")
        for key in self.footprints:
            if key in self.parcels:
                raise InvariantError(f"footprint id {key} collides with a parcel id", path="footprints")
        regions = self.regions()
        for w in self.weather.values():
            if w.region_id not in regions:
                raise InvariantError(
                    f"weather {w.id}: dangling region reference {w.region_id!r}", path="region_id", observed=w.region_id
                )
        for key, log in self.logs.items():
            if log.parcel_id not in self.parcels or key != log.parcel_id:
                raise InvariantError(
                    f"log {key}: dangling parcel reference {log.parcel_id!r}", path="parcel_id", observed=log.parcel_id
                )
            for e in log.events:
                if not t0 <= e.t <= t1:
                    raise InvariantError(f"log {key}: event t={e.t} outside season", path="events.t", observed=e.t)

    # -- lookups ----------------------------------------------------------

    def regions(self) -> list[str]:
        return sorted({p.region_id for p in self.parcels.values()})

    def parcel(self, pid: str) -> Parcel:
        if pid in self.parcels:
            return self.parcels[pid]
        if pid in self.footprints:
            return self.footprints[pid]
        raise UnknownParcel(f"unknown parcel {pid!r}", path="parcels", observed=pid)

    def region_parcels(self, region: str) -> list[str]:
        if region not in self.regions():
            raise UnknownRegion(f"unknown region {region!r}", path="region", observed=region, expected=self.regions())
        return sorted(pid for pid, p in self.parcels.items() if p.region_id == region)

    def weather_for(self, region: str) -> WeatherStream:
        for w in self.weather.values():
            if w.region_id == region:
                return w
        raise UnknownRegion(f"no weather stream for region {region!r}", path="region", observed=region, expected=self.regions())

    def grid_named(self, name: str) -> GridField:
        for g in self.grids.values():
            if g.name == name or g.id == name:
                return g
        raise UnknownBand(
            f"no grid field {name!r}", path="gridfield", observed=name, expected=sorted({g.name for g in self.grids.values()})
        )

    def raster_with_band(self, band: str) -> RasterTimeSeries:
        for r in self.rasters.values():
            if band in r.bands:
                return r
        available = sorted({b for r in self.rasters.values() for b in r.bands})
        raise UnknownBand(f"no raster carries band {band!r}", path="index", observed=band, expected=available)

    def irrigation(self, pid: str) -> dict[int, float]:
        log = self.logs.get(pid)
        return log.irrigation_by_day() if log else {}
