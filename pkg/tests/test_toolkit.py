from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agriworld.align import reproject_polygon
from agriworld.bench.worldgen import GenConfig, gen_world
from agriworld.errors import (
    ArgumentError,
    DimensionMismatch,
    LowCoverageError,
    SpatialMisalignment,
    TemporalWindowError,
    UnknownBand,
    UnknownTool,
)
from agriworld.geometry import point_in_ring
from agriworld.model import Crs
from agriworld.toolkit import ToolCall, ToolContext, invoke, registry, signatures
from agriworld.toolkit.geo import working_crs
from agriworld.toolkit.rs import zscores

from worlds import parcel, raster, rect, soil_grid, weather, world


def call(w, tool, **args):
    return invoke(w, ToolCall(tool, args))


@pytest.fixture(scope="module")
def w42():
    return gen_world(GenConfig(seed=42))


# -- geo ----------------------------------------------------------------------


def test_filter_no_predicates_returns_all(w42):
    value, _ = call(w42, "geo.filter_parcels")
    assert value["parcel_ids"] == sorted(w42.parcels)


def test_filter_by_crop_matches_generator_labels(w42):
    value, _ = call(w42, "geo.filter_parcels", crop="maize")
    assert value["parcel_ids"] == sorted(pid for pid, p in w42.parcels.items() if p.crop_type == "maize")


def test_filter_zero_area_range_is_empty(w42):
    value, _ = call(w42, "geo.filter_parcels", area_range=[0, 0])
    assert value["parcel_ids"] == []


def _clip(subject, clip):
    """Sutherland-Hodgman: ``subject`` clipped by the convex CCW ring ``clip``."""
    out = list(subject)
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        inp, out = out, []
        if not inp:
            break

        def inside(p):
            return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0

        def cross(p, q):
            x1, y1, x2, y2 = p[0], p[1], q[0], q[1]
            x3, y3, x4, y4 = a[0], a[1], b[0], b[1]
            den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
            t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
            return (x1 + t * (x2 - x1), y1 + t * (y2 - y1))

        s = inp[-1]
        for e in inp:
            if inside(e):
                if not inside(s):
                    out.append(cross(s, e))
                out.append(e)
            elif inside(s):
                out.append(cross(s, e))
            s = e
    return out


def _area(ring):
    return 0.5 * sum(ring[i][0] * ring[(i + 1) % len(ring)][1] - ring[(i + 1) % len(ring)][0] * ring[i][1] for i in range(len(ring)))


def test_sjoin_matches_all_pairs_clipping(w42):
    value, _ = call(w42, "geo.sjoin", left=sorted(w42.parcels), right=sorted(w42.footprints))
    crs = working_crs(w42)
    expected = []
    for lid in sorted(w42.parcels):
        a = reproject_polygon(w42.parcels[lid].geometry, crs).exterior
        for rid in sorted(w42.footprints):
            b = reproject_polygon(w42.footprints[rid].geometry, crs).exterior
            clipped = _clip(a, b)
            if len(clipped) >= 3 and _area(clipped) > 1e-6:
                expected.append([lid, rid])
    assert value["pairs"] == sorted(expected)
    assert value["pairs"], "the generated footprints overlap some parcels"


def test_sjoin_self_pair_and_disjoint():
    a = parcel("a", rect(0, 0, 10, 10))
    b = parcel("b", rect(10_000, 0, 10_010, 10))
    w = world([a, b], rasters=[raster(np.ones((1, 2, 2)))])
    assert call(w, "geo.sjoin", left=["a"], right=["a"])[0]["pairs"] == [["a", "a"]]
    assert call(w, "geo.sjoin", left=["a"], right=["b"])[0]["pairs"] == []


def test_sjoin_without_alignment_rejects_mixed_crs(w42):
    pid = sorted(w42.parcels)[0]
    fid = sorted(w42.footprints)[0]
    with pytest.raises(SpatialMisalignment):
        call(w42, "geo.sjoin", left=[pid], right=[fid], align=False)


# -- rs -------------------------------------------------------------------------


def _daily_world(n=30):
    p = parcel("p1", rect(0.5, 0.5, 3.5, 3.5))
    r = raster(np.ones((n, 4, 4)), timestamps=range(1, n + 1))
    return world([p], rasters=[r], season=(1, n))


def test_load_full_range():
    w = _daily_world()
    v, art = call(w, "rs.load", index="ndvi", time_range=[1, 30])
    assert v["timestamps"] == list(range(1, 31))
    assert art.meta["t_range"] == [1, 30]


def test_load_inclusive_count():
    v, _ = call(_daily_world(), "rs.load", index="ndvi", time_range=[10, 20])
    assert len(v["timestamps"]) == 11


def test_load_beyond_season_end():
    with pytest.raises(TemporalWindowError) as err:
        call(_daily_world(), "rs.load", index="ndvi", time_range=[20, 40])
    assert err.value.expected == [20, 30]


def test_load_unknown_band():
    with pytest.raises(UnknownBand):
        call(_daily_world(), "rs.load", index="ndwi", time_range=[1, 2])


def _zonal(w, pid, tau=0.3):
    view, _ = call(w, "rs.load", index="ndvi", time_range=[1, 1])
    return call(w, "rs.zonal_stats", raster_ts=view, parcels=[pid], tau_min=tau)


def test_zonal_uniform_field():
    p = parcel("p1", rect(0.0, 0.0, 2.0, 2.0))
    w = world([p], rasters=[raster(np.full((1, 2, 2), 5.0))])
    v, art = _zonal(w, "p1")
    assert v["values"]["p1"] == [5.0]
    assert v["validity"]["p1"] == [1.0]
    assert art.meta["validity_ratio"] == 1.0


def test_zonal_all_masked():
    p = parcel("p1", rect(0.0, 0.0, 2.0, 2.0))
    w = world([p], rasters=[raster(np.full((1, 2, 2), 5.0), np.zeros((1, 2, 2)))])
    with pytest.raises(LowCoverageError) as err:
        _zonal(w, "p1")
    assert err.value.details["nu"] == 0.0


def test_zonal_worked_three_by_three():
    vals = np.arange(1.0, 10.0).reshape(1, 3, 3)
    mask = np.ones((1, 3, 3))
    mask[0, [0, 0, 2, 2], [0, 2, 0, 2]] = 0
    w = world([parcel("p1", rect(0.0, 0.0, 3.0, 3.0))], rasters=[raster(vals, mask)])
    v, _ = _zonal(w, "p1")
    assert v["values"]["p1"] == [5.0]
    assert v["validity"]["p1"] == [5 / 9]


def test_zonal_rejects_crs_mismatch():
    geo = parcel("p1", rect(0.0, 0.0, 0.00001, 0.00001), crs=Crs.geo())
    w = world([geo], rasters=[raster(np.ones((1, 2, 2)))])
    with pytest.raises(SpatialMisalignment):
        _zonal(w, "p1")


def test_anomaly_constant_series_has_no_flags():
    r = zscores(list(range(10)), [3.0] * 10, (0, 4), 2.5)
    assert not any(r["flagged"])


def test_anomaly_hand_zscore():
    r = zscores([1, 2, 3, 4], [8.0, 10.0, 12.0, 16.0], (1, 3), 2.5)
    expected = 6.0 / math.sqrt(8.0 / 3.0)
    assert r["score"][3] == pytest.approx(expected, rel=1e-12)
    assert round(r["score"][3], 3) == 3.674
    assert r["flagged"][3] and r["flagged_days"] == [4]


def test_anomaly_mean_scores_zero():
    r = zscores([1, 2, 3, 4], [8.0, 10.0, 12.0, 10.0], (1, 3), 2.5)
    assert r["score"][3] == 0.0 and not r["flagged"][3]


# -- grid -------------------------------------------------------------------------


def test_grid_uniform_value():
    ps = [parcel("a", rect(0.0, 0.0, 2.0, 2.0)), parcel("b", rect(2.0, 2.0, 4.0, 4.0))]
    w = world(ps, grids=[soil_grid(np.full((4, 4), 120.0))])
    v, _ = call(w, "grid.sample", gridfield="soil_water_capacity", parcels=["a", "b"])
    assert {k: d["value"] for k, d in v["values"].items()} == {"a": 120.0, "b": 120.0}


def test_grid_two_cell_mean():
    g = soil_grid(np.array([[100.0, 140.0]]))
    w = world([parcel("a", rect(0.0, 0.0, 2.0, 1.0))], grids=[g])
    v, _ = call(w, "grid.sample", gridfield="soil_water_capacity", parcels="a")
    assert v["values"]["a"]["value"] == 120.0


def _brute_cells(grid, ring):
    x0, y0 = grid.origin
    dx, dy = grid.pixel_size
    cells = []
    for r in range(grid.height):
        for c in range(grid.width):
            if point_in_ring(x0 + (c + 0.5) * dx, y0 - (r + 0.5) * dy, ring):
                cells.append((r, c))
    return cells


def test_grid_sample_matches_cell_enumeration(w42):
    grid = w42.grid_named("soil_water_capacity")
    aligned, _ = call(w42, "geo.align", parcels=sorted(w42.parcels), crs=grid.crs.to_json())
    v, _ = call(w42, "grid.sample", gridfield="soil_water_capacity", parcels=aligned)
    for pid, p in w42.parcels.items():
        ring = reproject_polygon(p.geometry, grid.crs).exterior
        cells = _brute_cells(grid, ring)
        assert v["values"][pid]["value"] == math.fsum(grid.values[r, c] for r, c in cells) / len(cells)
        assert v["cells"][pid] == len(cells)


def test_grid_aggregate_region_matches_union(w42):
    grid = w42.grid_named("soil_water_capacity")
    for region in w42.regions():
        cells = set()
        for pid in w42.region_parcels(region):
            cells.update(_brute_cells(grid, reproject_polygon(w42.parcels[pid].geometry, grid.crs).exterior))
        v, _ = call(w42, "grid.aggregate", gridfield="soil_water_capacity", region=region)
        assert v["value"] == math.fsum(grid.values[r, c] for r, c in sorted(cells)) / len(cells)


def test_grid_sample_requires_alignment(w42):
    with pytest.raises(SpatialMisalignment):
        call(w42, "grid.sample", gridfield="soil_water_capacity", parcels=sorted(w42.parcels)[:1])


def test_grid_aggregate_single_parcel_equals_sample():
    g = soil_grid(np.arange(16.0).reshape(4, 4) + 80.0)
    w = world([parcel("a", rect(0.2, 0.2, 3.1, 2.8))], grids=[g])
    agg, _ = call(w, "grid.aggregate", gridfield="soil_water_capacity", region="r1")
    one, _ = call(w, "grid.sample", gridfield="soil_water_capacity", parcels="a")
    assert agg["value"] == one["values"]["a"]["value"]


# -- wx -------------------------------------------------------------------------------


def _wx_world():
    days = [1, 2, 3, 5, 6]
    wx = weather(days, precip=[1, 2, 3, 4, 5], et0=[1] * 5, tmax=[20, 21, 20, 24, 25], tmin=[5] * 5)
    return world([parcel("p1", rect(0, 0, 1, 1))], weathers=[wx], season=(1, 6))


def test_wx_full_season():
    v, _ = call(_wx_world(), "wx.get", region="r1", time_range=[1, 6], var="tmin_degC")
    assert v["t"] == [1, 2, 3, 4, 5, 6]


def test_wx_precip_gap_is_zero():
    v, _ = call(_wx_world(), "wx.get", region="r1", time_range=[1, 6], var="precip_mm")
    assert v["values"][3] == 0.0


def test_wx_tmax_gap_interpolates():
    v, _ = call(_wx_world(), "wx.get", region="r1", time_range=[3, 5], var="tmax_degC")
    assert v["values"] == [20.0, 22.0, 24.0]


def test_wx_unknown_var():
    with pytest.raises(UnknownBand):
        call(_wx_world(), "wx.get", region="r1", time_range=[1, 6], var="tmx")


def _series(values, unit="mm"):
    return {"t": list(range(1, len(values) + 1)), "values": list(values), "unit": unit}


def test_rolling_sum_hand_values():
    v, _ = call(_wx_world(), "wx.rolling_sum", series=_series([1, 2, 3, 4]), window=3)
    assert v["values"] == [None, None, 6.0, 9.0]


def test_rolling_sum_window_one_is_identity():
    v, _ = call(_wx_world(), "wx.rolling_sum", series=_series([1.5, 2.5, 0.0]), window=1)
    assert v["values"] == [1.5, 2.5, 0.0]


def test_rolling_sum_zeros():
    v, _ = call(_wx_world(), "wx.rolling_sum", series=_series([0.0] * 5), window=2)
    assert v["values"][1:] == [0.0] * 4


def test_degree_days_cases():
    w = _wx_world()
    v, _ = call(w, "wx.degree_days", tmax_series=_series([28.0], "degC"), tmin_series=_series([12.0], "degC"))
    assert v["daily"] == [10.0]
    v, _ = call(w, "wx.degree_days", tmax_series=_series([9.0], "degC"), tmin_series=_series([5.0], "degC"))
    assert v["daily"] == [0.0]
    v, _ = call(w, "wx.degree_days", tmax_series=_series([12.0], "degC"), tmin_series=_series([8.0], "degC"))
    assert v["daily"] == [0.0]


def test_degree_days_requires_celsius():
    with pytest.raises(DimensionMismatch):
        call(_wx_world(), "wx.degree_days", tmax_series=_series([28.0], "mm"), tmin_series=_series([12.0], "degC"))


# -- registry and units tool -----------------------------------------------------------


def test_same_call_same_prov():
    w = _daily_world()
    args = {"index": "ndvi", "time_range": [1, 5]}
    assert call(w, "rs.load", **args)[1].prov == call(w, "rs.load", **args)[1].prov


def test_theta_change_changes_prov():
    series = {"t": [1, 2, 3, 4], "values": [1.0, 1.0, 1.0, 5.0], "unit": "dimensionless"}
    w = _daily_world()
    a = call(w, "rs.anomaly", ts=series, baseline_window=[1, 3], threshold=2.5)[1].prov
    b = call(w, "rs.anomaly", ts=series, baseline_window=[1, 3], threshold=2.6)[1].prov
    assert a != b


def test_unknown_tool():
    with pytest.raises(UnknownTool):
        call(_daily_world(), "rs.ndwi")


def test_missing_argument():
    with pytest.raises(ArgumentError):
        call(_daily_world(), "rs.load", index="ndvi")


def test_disabled_family_hides_tools():
    ctx = ToolContext(_daily_world(), disabled_families=frozenset({"rs"}))
    assert not any(name.startswith("rs.") for name in registry(ctx))
    with pytest.raises(UnknownTool):
        call(ctx, "rs.load", index="ndvi", time_range=[1, 2])
    assert all(not s["tool"].startswith("rs.") for s in signatures(ctx))


def test_units_convert_tool():
    v, art = call(_daily_world(), "units.convert", value={"value": 1000.0, "unit": "g"}, to="kg")
    assert v == {"value": 1.0, "unit": "kg"}
    assert art.meta["unit"] == "kg"


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_artifact_meta_always_has_unit(a, b):
    series = {"t": [1, 2, 3], "values": [a, b, a], "unit": "dimensionless"}
    _, art = call(_daily_world(), "wx.rolling_sum", series=series, window=2)
    assert art.meta["unit"] == "dimensionless" and art.meta["tool"] == "wx.rolling_sum"
