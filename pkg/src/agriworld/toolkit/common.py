"""Argument coercion shared by the tool families."""

from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np

from ..errors import ArgumentError, EmptyZone, TemporalWindowError
from ..geometry import bbox, points_in_ring
from ..model import Crs, Polygon, WorldState, _GridHeader


def parcel_ids(world: WorldState, parcels: Any) -> list[str]:
    """Accept an id, an id list, or a payload carrying ``parcel_ids``."""
    if isinstance(parcels, str):
        ids = [parcels]
    elif isinstance(parcels, dict) and "parcel_ids" in parcels:
        ids = list(parcels["parcel_ids"])
    elif isinstance(parcels, (list, tuple)):
        ids = list(parcels)
    else:
        raise ArgumentError("parcels must be an id, a list of ids, or a geometry payload", path="parcels")
    for pid in ids:
        if not isinstance(pid, str):
            raise ArgumentError("parcel ids must be strings", path="parcels", observed=pid)
        world.parcel(pid)
    return ids


def geometries(world: WorldState, parcels: Any) -> list[tuple[str, Polygon]]:
    """Resolve ``parcels`` to ``(id, polygon)`` pairs.

    Id forms resolve to the stored (native CRS) geometry; a ``geo.align``
    payload resolves to its reprojected rings.
    """
    if isinstance(parcels, dict) and "geometries" in parcels:
        crs = Crs.from_json(parcels["crs"])
        out = []
        for pid in parcels.get("parcel_ids", sorted(parcels["geometries"])):
            ring = parcels["geometries"][pid]
            out.append((pid, Polygon((tuple((p[0], p[1]) for p in ring),), crs)))
        return out
    return [(pid, world.parcel(pid).geometry) for pid in parcel_ids(world, parcels)]


def window(value: Any, path: str = "time_range") -> tuple[int, int]:
    t0, t1 = int(value[0]), int(value[1])
    if t1 < t0:
        raise ArgumentError(f"{path} end before start", path=path, observed=[t0, t1])
    return t0, t1


def check_window(requested: tuple[int, int], available: tuple[int, int], what: str) -> None:
    t0, t1 = requested
    a0, a1 = available
    if t0 < a0 or t1 > a1:
        clipped = [max(t0, a0), min(t1, a1)]
        if clipped[0] > clipped[1]:
            clipped = [a0, a1]
        raise TemporalWindowError(
            f"{what}: requested window ({t0}, {t1}) exceeds available ({a0}, {a1})",
            path="time_range",
            observed=[t0, t1],
            expected=clipped,
            available=[a0, a1],
        )


def zone(grid: _GridHeader, poly: Polygon, owner: str) -> tuple[np.ndarray, np.ndarray]:
    """Row/col indices of cells whose centers fall inside ``poly`` (row-major order)."""
    x0, y0 = grid.origin
    dx, dy = grid.pixel_size
    minx, miny, maxx, maxy = bbox(poly.exterior)
    c0 = max(0, int(math.floor((minx - x0) / dx - 0.5)))
    c1 = min(grid.width - 1, int(math.ceil((maxx - x0) / dx - 0.5)))
    r0 = max(0, int(math.floor((y0 - maxy) / dy - 0.5)))
    r1 = min(grid.height - 1, int(math.ceil((y0 - miny) / dy - 0.5)))
    if c1 < c0 or r1 < r0:
        raise EmptyZone(f"no cell centers inside {owner}", path="parcels", observed=owner)
    rows = np.arange(r0, r1 + 1)
    cols = np.arange(c0, c1 + 1)
    cx = x0 + (cols + 0.5) * dx
    cy = y0 - (rows + 0.5) * dy
    xs, ys = np.meshgrid(cx, cy)
    inside = points_in_ring(xs, ys, poly.exterior)
    rr, cc = np.nonzero(inside)
    if rr.size == 0:
        raise EmptyZone(f"no cell centers inside {owner}", path="parcels", observed=owner)
    return rows[rr], cols[cc]


def series_payload(t: Sequence[int], values: Sequence[Any], unit: str, **extra: Any) -> dict[str, Any]:
    out = {"t": [int(x) for x in t], "values": list(values), "unit": unit}
    out.update(extra)
    return out


def as_series(obj: Any, path: str) -> tuple[list[int], list[Any], str]:
    if not isinstance(obj, dict) or "t" not in obj or "values" not in obj:
        raise ArgumentError(f"{path} must be a series payload with t and values", path=path)
    t, v = list(obj["t"]), list(obj["values"])
    if len(t) != len(v):
        raise ArgumentError(f"{path}: t and values differ in length", path=path)
    return t, v, obj.get("unit", "dimensionless")
