"""Soil/terrain access over static grid fields."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyZone
from ..model import GridField, Polygon
from .common import geometries, zone
from .registry import Param, ToolContext, ToolOutput, tool


def sample_parcel(ctx: ToolContext, grid: GridField, pid: str, poly: Polygon, auto_align: bool = False) -> tuple[float, int]:
    """Mean of cells whose centers fall in ``poly``; returns ``(mean, n_cells)``."""
    if auto_align:
        poly = ctx.align_polygon(poly, grid.crs)
    ctx.require_aligned(poly.crs, grid.crs, path="parcels")
    rows, cols = zone(grid, poly, pid)
    vals = [float(v) for v in grid.values[rows, cols]]
    return math.fsum(vals) / len(vals), len(vals)


def _grid_meta(grid: GridField) -> dict:
    return {"unit": grid.unit, "crs": grid.crs.to_json(), "resolution": list(grid.pixel_size)}


@tool("grid.sample", gridfield=Param("str", data=True), parcels=Param("parcels", data=True))
def sample(ctx: ToolContext, gridfield, parcels) -> ToolOutput:
    """Per-parcel mean of a grid field, in the grid's unit."""
    grid = ctx.world.grid_named(gridfield)
    values, cells = {}, {}
    for pid, poly in geometries(ctx.world, parcels):
        mean, n = sample_parcel(ctx, grid, pid, poly)
        values[pid] = {"value": mean, "unit": grid.unit}
        cells[pid] = n
    meta = _grid_meta(grid)
    if len(values) == 1:
        meta["headline"] = f"values.{next(iter(values))}.value"
    return ToolOutput("table", {"gridfield": grid.name, "values": values, "cells": cells}, meta)


@tool("grid.aggregate", gridfield=Param("str", data=True), region=Param("parcels", data=True))
def aggregate(ctx: ToolContext, gridfield, region) -> ToolOutput:
    """Mean over the union of a region's parcels (each cell counted once)."""
    world = ctx.world
    grid = world.grid_named(gridfield)
    if isinstance(region, str) and region in world.regions():
        members = [(pid, world.parcels[pid].geometry) for pid in world.region_parcels(region)]
        label = region
    else:
        members = geometries(world, region)
        label = None
    seen: set[tuple[int, int]] = set()
    for pid, poly in members:
        poly = ctx.align_polygon(poly, grid.crs)
        ctx.require_aligned(poly.crs, grid.crs, path="region")
        try:
            rows, cols = zone(grid, poly, pid)
        except EmptyZone:
            continue
        seen.update(zip(rows.tolist(), cols.tolist()))
    if not seen:
        raise EmptyZone(f"no cell centers inside region {label or region!r}", path="region", observed=label)
    cells = sorted(seen)
    idx = np.array(cells)
    vals = [float(v) for v in grid.values[idx[:, 0], idx[:, 1]]]
    mean = math.fsum(vals) / len(vals)
    meta = _grid_meta(grid)
    meta["headline"] = "value"
    return ToolOutput(
        "scalar",
        {"gridfield": grid.name, "region": label, "value": mean, "unit": grid.unit, "cells": len(vals)},
        meta,
    )
