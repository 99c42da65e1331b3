"""Geospatial querying: parcel filters, spatial joins, explicit alignment."""

from __future__ import annotations

from ..errors import ArgumentError, UnknownRegion
from ..geometry import intersection_area
from ..model import CROP_TYPES, Crs, WorldState
from .common import geometries, parcel_ids
from .registry import Param, ToolContext, ToolOutput, tool


def working_crs(world: WorldState) -> Crs:
    """Common metric CRS of a world: its first raster's, else first grid's, else local."""
    for key in sorted(world.rasters):
        if world.rasters[key].crs.kind == "METRIC":
            return world.rasters[key].crs
    for key in sorted(world.grids):
        if world.grids[key].crs.kind == "METRIC":
            return world.grids[key].crs
    lats = [y for p in world.parcels.values() for _, y in p.geometry.exterior if p.geometry.crs.kind == "GEO"]
    lat0 = round((min(lats) + max(lats)) / 2, 6) if lats else 0.0
    return Crs.metric(lat0)


@tool(
    "geo.filter_parcels",
    region=Param("str", required=False),
    crop=Param("str", required=False),
    area_range=Param("list", required=False),
)
def filter_parcels(ctx: ToolContext, region=None, crop=None, area_range=None) -> ToolOutput:
    """Parcel ids matching every given predicate, sorted; areas in ha."""
    world = ctx.world
    if region is not None and region not in world.regions():
        raise UnknownRegion(f"unknown region {region!r}", path="region", observed=region, expected=world.regions())
    if crop is not None and crop not in CROP_TYPES:
        raise ArgumentError(f"unknown crop {crop!r}", path="crop", observed=crop, expected=list(CROP_TYPES))
    if area_range is not None:
        if len(area_range) != 2:
            raise ArgumentError("area_range must be (lo, hi)", path="area_range", observed=area_range)
        lo, hi = float(area_range[0]), float(area_range[1])
    crs = working_crs(world)
    ids, areas = [], {}
    for pid in sorted(world.parcels):
        p = world.parcels[pid]
        if region is not None and p.region_id != region:
            continue
        if crop is not None and p.crop_type != crop:
            continue
        area_ha = ctx.align_polygon(p.geometry, crs).area() / 10_000.0
        if area_range is not None and not lo <= area_ha <= hi:
            continue
        ids.append(pid)
        areas[pid] = area_ha
    return ToolOutput(
        "table",
        {"parcel_ids": ids, "area_ha": areas},
        {"unit": "ha", "crs": crs.to_json()},
    )


@tool("geo.sjoin", left=Param("parcels", data=True), right=Param("parcels", data=True), align=Param("bool", False, True))
def sjoin(ctx: ToolContext, left, right, align=True) -> ToolOutput:
    """Pairs of geometries with positive intersection area, sorted."""
    world = ctx.world
    lg = geometries(world, left)
    rg = geometries(world, right)
    crs = working_crs(world)
    if align:
        lg = [(pid, ctx.align_polygon(g, crs)) for pid, g in lg]
        rg = [(pid, ctx.align_polygon(g, crs)) for pid, g in rg]
    else:
        for _, a in lg:
            for _, b in rg:
                ctx.require_aligned(a.crs, b.crs, path="right")
    pairs = []
    for lid, a in lg:
        for rid, b in rg:
            if intersection_area(a.exterior, b.exterior) > 0.0:
                pairs.append([lid, rid])
    pairs.sort()
    return ToolOutput("table", {"pairs": pairs}, {"unit": "dimensionless", "crs": crs.to_json()})


@tool("geo.align", parcels=Param("parcels", data=True), crs=Param("crs"))
def align_parcels(ctx: ToolContext, parcels, crs) -> ToolOutput:
    """Reproject parcel geometries into ``crs`` (identity when alignment is off)."""
    target = Crs.from_json(crs)
    out_crs = None
    geoms = {}
    ids = []
    for pid, g in geometries(ctx.world, parcels):
        aligned = ctx.align_polygon(g, target)
        out_crs = aligned.crs
        geoms[pid] = [[x, y] for x, y in aligned.exterior]
        ids.append(pid)
    out_crs = out_crs or target
    return ToolOutput(
        "table",
        {"crs": out_crs.to_json(), "parcel_ids": ids, "geometries": geoms},
        {"unit": "m" if out_crs.kind == "METRIC" else "dimensionless", "crs": out_crs.to_json()},
    )


__all__ = ["working_crs", "filter_parcels", "sjoin", "align_parcels", "parcel_ids"]
