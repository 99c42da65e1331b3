"""Canonical alignment: vector reprojection followed by daily resampling.

The only metric CRS is a local equirectangular projection
``x = R cos(lat0) lon``, ``y = R lat`` (radians, R = 6 371 000 m), which is
analytically invertible.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Any, Sequence, Union

from .errors import EmptySeries, ExtrapolationError, InvariantError, OutOfDomain, SpatialMisalignment
from .model import Crs, Polygon, RasterTimeSeries

EARTH_RADIUS_M = 6_371_000.0

Series = list[tuple[int, float]]


@dataclass(frozen=True)
class AlignmentPolicy:
    target_crs: Crs
    interp: str = "linear"
    extrapolation: str = "hold"
    target_freq: str = "daily"

    def __post_init__(self) -> None:
        if self.interp not in ("nearest", "linear"):
            raise InvariantError("interp must be 'nearest' or 'linear'", path="interp", observed=self.interp)
        if self.extrapolation not in ("hold", "error"):
            raise InvariantError("extrapolation must be 'hold' or 'error'", path="extrapolation", observed=self.extrapolation)
        if self.target_freq != "daily":
            raise InvariantError("only daily frequency is supported", path="target_freq", observed=self.target_freq)

    def to_json(self) -> dict[str, Any]:
        return {
            "target_crs": self.target_crs.to_json(),
            "target_freq": self.target_freq,
            "interp": self.interp,
            "extrapolation": self.extrapolation,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "AlignmentPolicy":
        return cls(
            target_crs=Crs.from_json(obj["target_crs"]),
            interp=obj.get("interp", "linear"),
            extrapolation=obj.get("extrapolation", "hold"),
            target_freq=obj.get("target_freq", "daily"),
        )


def _to_geo(x: float, y: float, crs: Crs) -> tuple[float, float]:
    if crs.kind == "GEO":
        return x, y
    c = math.cos(math.radians(crs.lat0))
    if c <= 0.0:
        raise OutOfDomain(f"METRIC lat0={crs.lat0} has no inverse", path="lat0", observed=crs.lat0)
    lon = math.degrees(x / (EARTH_RADIUS_M * c))
    lat = math.degrees(y / EARTH_RADIUS_M)
    if abs(lat) > 90.0:
        raise OutOfDomain(f"latitude {lat:.6f} outside [-90, 90] after inverse projection", observed=[x, y])
    return lon, lat


def _from_geo(lon: float, lat: float, crs: Crs) -> tuple[float, float]:
    if crs.kind == "GEO":
        return lon, lat
    c = math.cos(math.radians(crs.lat0))
    return EARTH_RADIUS_M * c * math.radians(lon), EARTH_RADIUS_M * math.radians(lat)


def reproject_point(pt: Sequence[float], src: Crs, dst: Crs) -> tuple[float, float]:
    x, y = float(pt[0]), float(pt[1])
    if src == dst:
        return x, y
    if src.kind == "GEO" and abs(y) > 90.0:
        raise OutOfDomain(f"latitude {y} outside [-90, 90]", observed=[x, y])
    lon, lat = _to_geo(x, y, src)
    return _from_geo(lon, lat, dst)


def reproject_polygon(poly: Polygon, dst: Crs) -> Polygon:
    if poly.crs == dst:
        return poly
    rings = tuple(tuple(reproject_point(p, poly.crs, dst) for p in ring) for ring in poly.rings)
    return Polygon(rings, dst)


def _check_series(ts: Sequence[tuple[int, float]]) -> Series:
    if not ts:
        raise EmptySeries("cannot resample an empty series")
    out = [(int(t), float(v)) for t, v in ts]
    for (a, _), (b, _) in zip(out, out[1:]):
        if b <= a:
            raise InvariantError("series timestamps must be strictly increasing", observed=b)
    return out


def resample_series(ts: Sequence[tuple[int, float]], policy: AlignmentPolicy, t_range: tuple[int, int]) -> Series:
    """Resample to every integer day in ``t_range`` (inclusive)."""
    samples = _check_series(ts)
    t0, t1 = int(t_range[0]), int(t_range[1])
    times = [t for t, _ in samples]
    first, last = times[0], times[-1]
    if policy.extrapolation == "error" and (t0 < first or t1 > last):
        raise ExtrapolationError(
            f"range ({t0}, {t1}) outside sample span ({first}, {last})",
            path="time_range",
            observed=[t0, t1],
            expected=[max(t0, first), min(t1, last)],
        )
    out: Series = []
    for t in range(t0, t1 + 1):
        if t <= first:
            out.append((t, samples[0][1]))
            continue
        if t >= last:
            out.append((t, samples[-1][1]))
            continue
        i = bisect.bisect_left(times, t)
        if times[i] == t:
            out.append((t, samples[i][1]))
            continue
        (ta, va), (tb, vb) = samples[i - 1], samples[i]
        if policy.interp == "nearest":
            # ties go to the earlier sample
            out.append((t, va if (t - ta) <= (tb - t) else vb))
        else:
            v = va + (vb - va) * (t - ta) / (tb - ta)
            out.append((t, min(max(v, min(va, vb)), max(va, vb))))
    return out


def check_aligned(a: Any, b: Any) -> None:
    """Raise :class:`SpatialMisalignment` unless both entities share a CRS."""
    ca = a if isinstance(a, Crs) else a.crs
    cb = b if isinstance(b, Crs) else b.crs
    if ca != cb:
        raise SpatialMisalignment(
            f"CRS mismatch: {ca} vs {cb}",
            observed=ca.to_json(),
            expected=cb.to_json(),
        )


def _is_series(entity: Any) -> bool:
    return isinstance(entity, (list, tuple)) and all(isinstance(p, (list, tuple)) and len(p) == 2 for p in entity)


Alignable = Union[Polygon, RasterTimeSeries, Series]


def align(entity: Alignable, policy: AlignmentPolicy) -> Alignable:
    """Apply reprojection then daily resampling, whichever apply to ``entity``.

    Polygons are reprojected. Series are resampled to daily over their own
    span. Rasters are never warped: a raster in a CRS other than the target
    raises :class:`SpatialMisalignment`.
    """
    if isinstance(entity, Polygon):
        return reproject_polygon(entity, policy.target_crs)
    if isinstance(entity, RasterTimeSeries):
        check_aligned(entity, policy.target_crs)
        return entity
    if _is_series(entity):
        samples = _check_series(entity)
        return resample_series(samples, policy, (samples[0][0], samples[-1][0]))
    raise InvariantError(f"cannot align object of type {type(entity).__name__}")
