"""World bundle directories: ``world.json`` plus one ``raster_<id>.json`` per raster."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import canonical
from .errors import AgroError, BundleFormatError, InvariantError, IoError
from .model import (
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
from .units import Quantity

FORMAT_VERSION = 1


def world_to_json(world: WorldState) -> dict[str, Any]:
    return {
        "format": FORMAT_VERSION,
        "world_id": world.world_id,
        "season": list(world.season),
        "parcels": [p.to_json() for p in world.parcels.values()],
        "footprints": [p.to_json() for p in world.footprints.values()],
        "grids": [
            dict(g.header(), values=np.asarray(g.values).ravel().tolist()) for g in world.grids.values()
        ],
        "weather": [
            {
                "id": w.id,
                "region_id": w.region_id,
                "records": [{"t": r.t, "vars": dict(r.vars)} for r in w.records],
            }
            for w in world.weather.values()
        ],
        "logs": [
            {
                "parcel_id": log.parcel_id,
                "events": [{"t": e.t, "action": e.action, "q": e.q.to_json()} for e in log.events],
            }
            for log in world.logs.values()
        ],
        "rasters": sorted(world.rasters),
    }


def raster_to_json(r: RasterTimeSeries) -> dict[str, Any]:
    return {
        "header": r.header(),
        "bands": {k: np.asarray(v).ravel().tolist() for k, v in r.bands.items()},
        "mask": np.asarray(r.mask).ravel().astype(int).tolist(),
    }


def save_world(world: WorldState, path: str | Path) -> None:
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        canonical.write(root / "world.json", world_to_json(world))
        for rid, r in world.rasters.items():
            canonical.write(root / f"raster_{rid}.json", raster_to_json(r))
    except OSError as exc:
        raise IoError(f"cannot write bundle at {root}: {exc}", path=str(root)) from exc


def _parcel(obj: dict[str, Any], where: str) -> Parcel:
    try:
        return Parcel(
            id=obj["id"],
            geometry=Polygon.from_json(obj["geometry"]),
            crop_type=obj.get("crop_type"),
            region_id=obj["region_id"],
            attributes={k: Quantity.from_json(v) for k, v in obj.get("attributes", {}).items()},
        )
    except InvariantError as exc:
        raise InvariantError(f"{where} {obj.get('id')}: {exc.message}", path=exc.path, observed=exc.observed) from exc


def _raster(obj: dict[str, Any]) -> RasterTimeSeries:
    h = obj["header"]
    shape = (len(h["timestamps"]), h["height"], h["width"])
    size = shape[0] * shape[1] * shape[2]
    bands = {}
    for name, flat in obj["bands"].items():
        if len(flat) != size:
            raise InvariantError(f"raster {h['id']}: band {name} has {len(flat)} values, expected {size}", path=f"bands.{name}")
        bands[name] = np.asarray(flat, dtype=np.float64).reshape(shape)
    if len(obj["mask"]) != size:
        raise InvariantError(f"raster {h['id']}: mask has {len(obj['mask'])} values, expected {size}", path="mask")
    return RasterTimeSeries(
        id=h["id"],
        crs=Crs.from_json(h["crs"]),
        origin=tuple(h["origin"]),
        pixel_size=tuple(h["pixel_size"]),
        width=h["width"],
        height=h["height"],
        timestamps=tuple(h["timestamps"]),
        bands=bands,
        mask=np.asarray(obj["mask"], dtype=np.int64).reshape(shape),
        units=h["units"],
    )


def _grid(obj: dict[str, Any]) -> GridField:
    return GridField(
        id=obj["id"],
        crs=Crs.from_json(obj["crs"]),
        origin=tuple(obj["origin"]),
        pixel_size=tuple(obj["pixel_size"]),
        width=obj["width"],
        height=obj["height"],
        values=np.asarray(obj["values"], dtype=np.float64).reshape(obj["height"], obj["width"]),
        unit=obj["unit"],
        name=obj["name"],
    )


def world_from_json(doc: dict[str, Any], rasters: dict[str, RasterTimeSeries]) -> WorldState:
    parcels = [_parcel(p, "parcel") for p in doc["parcels"]]
    ids = [p.id for p in parcels]
    if len(set(ids)) != len(ids):
        raise InvariantError("parcel ids must be unique", path="parcels")
    footprints = [_parcel(p, "footprint") for p in doc.get("footprints", [])]
    return WorldState(
        world_id=doc["world_id"],
        season=tuple(doc["season"]),
        parcels={p.id: p for p in parcels},
        footprints={p.id: p for p in footprints},
        rasters=rasters,
        grids={g.id: g for g in (_grid(g) for g in doc.get("grids", []))},
        weather={
            w["id"]: WeatherStream(
                id=w["id"],
                region_id=w["region_id"],
                records=tuple(WeatherRecord(r["t"], r["vars"]) for r in w["records"]),
            )
            for w in doc.get("weather", [])
        },
        logs={
            log["parcel_id"]: ManagementLog(
                parcel_id=log["parcel_id"],
                events=tuple(
                    ManagementEvent(e["t"], e["action"], Quantity.from_json(e["q"])) for e in log["events"]
                ),
            )
            for log in doc.get("logs", [])
        },
    )


def load_world(path: str | Path) -> WorldState:
    """Load and validate a bundle directory.

    Raises :class:`BundleFormatError` for unreadable/malformed JSON and
    :class:`InvariantError` for semantic violations (naming the entity).
    """
    root = Path(path)
    world_file = root / "world.json"
    if not world_file.is_file():
        raise IoError(f"no world.json in {root}", path=str(world_file))
    try:
        doc = canonical.read(world_file)
        rasters = {}
        for rid in doc.get("rasters", []):
            rfile = root / f"raster_{rid}.json"
            if not rfile.is_file():
                raise BundleFormatError(f"missing raster file {rfile.name}", path=rfile.name)
            rasters[rid] = _raster(canonical.read(rfile))
        return world_from_json(doc, rasters)
    except AgroError:
        raise
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"malformed JSON in bundle {root}: {exc}", path=str(root)) from exc
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise BundleFormatError(f"malformed bundle record in {root}: {exc!r}", path=str(root)) from exc
    except OSError as exc:
        raise IoError(f"cannot read bundle {root}: {exc}", path=str(root)) from exc


def bundle_digest(path: str | Path) -> str:
    return canonical.hash_directory(path)
