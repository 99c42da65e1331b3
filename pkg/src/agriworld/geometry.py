"""Planar polygon primitives: shoelace area, simplicity, point containment."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

Ring = Sequence[tuple[float, float]]


def signed_area(ring: Ring) -> float:
    """Shoelace signed area; positive for counter-clockwise rings."""
    n = len(ring)
    terms = []
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        terms.append(x0 * y1 - x1 * y0)
    return math.fsum(terms) / 2.0


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, cx, cy) -> bool:
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient(*p3, *p4, *p1)
    d2 = _orient(*p3, *p4, *p2)
    d3 = _orient(*p1, *p2, *p3)
    d4 = _orient(*p1, *p2, *p4)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(*p3, *p4, *p1):
        return True
    if d2 == 0 and _on_segment(*p3, *p4, *p2):
        return True
    if d3 == 0 and _on_segment(*p1, *p2, *p3):
        return True
    if d4 == 0 and _on_segment(*p1, *p2, *p4):
        return True
    return False


def is_simple(ring: Ring) -> bool:
    n = len(ring)
    if n < 3:
        return False
    if len(set(map(tuple, ring))) != n:
        return False
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def point_in_ring(x: float, y: float, ring: Ring) -> bool:
    """Crossing-number test (half-open edge rule, so each point has one answer)."""
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def points_in_ring(xs: np.ndarray, ys: np.ndarray, ring: Ring) -> np.ndarray:
    """Vectorized :func:`point_in_ring`; same arithmetic, element-wise."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        crosses = (yi > ys) != (yj > ys)
        if crosses.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = xi + (ys - yi) * (xj - xi) / (yj - yi)
            inside ^= crosses & (xs < x_cross)
        j = i
    return inside


def bbox(ring: Ring) -> tuple[float, float, float, float]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    return min(xs), min(ys), max(xs), max(ys)


def intersection_area(a: Ring, b: Ring) -> float:
    """Area of the intersection of two simple polygons (shapely-backed)."""
    from shapely.geometry import Polygon as _SPolygon

    pa, pb = _SPolygon(a), _SPolygon(b)
    if not pa.intersects(pb):
        return 0.0
    return float(pa.intersection(pb).area)
