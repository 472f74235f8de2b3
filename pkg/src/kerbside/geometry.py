"""Planar geometry helpers for region assignment and trace segmentation.

Region polygons are at most a few kilometres across, so plain (lat, lon)
coordinates are treated as planar; no geodesy dependency is needed.
"""

from __future__ import annotations

import math
from typing import Sequence

LatLon = tuple[float, float]

_EARTH_RADIUS_M = 6_371_000.0
_EPS = 1e-12


def point_on_segment(p: LatLon, a: LatLon, b: LatLon) -> bool:
    """True if p lies on the closed segment a-b (within a tiny tolerance)."""
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > _EPS:
        return False
    return (
        min(a[0], b[0]) - _EPS <= p[0] <= max(a[0], b[0]) + _EPS
        and min(a[1], b[1]) - _EPS <= p[1] <= max(a[1], b[1]) + _EPS
    )


def point_on_boundary(p: LatLon, polygon: Sequence[LatLon]) -> bool:
    n = len(polygon)
    for i in range(n):
        if point_on_segment(p, polygon[i], polygon[(i + 1) % n]):
            return True
    return False


def point_in_polygon(p: LatLon, polygon: Sequence[LatLon]) -> bool:
    """Even-odd ray-casting containment test; boundary points count as inside."""
    if point_on_boundary(p, polygon):
        return True
    x, y = p
    inside = False
    n = len(polygon)
    ax, ay = polygon[-1]
    for bx, by in polygon:
        # Ray east from p; count crossings of edge (a, b).
        if (ay > y) != (by > y):
            x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
            if x_cross > x:
                inside = not inside
        ax, ay = bx, by
    return inside


def _orient(a: LatLon, b: LatLon, c: LatLon) -> int:
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if v > _EPS:
        return 1
    if v < -_EPS:
        return -1
    return 0


def segments_intersect(a: LatLon, b: LatLon, c: LatLon, d: LatLon) -> bool:
    """True if closed segments a-b and c-d share any point."""
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and point_on_segment(c, a, b):
        return True
    if o2 == 0 and point_on_segment(d, a, b):
        return True
    if o3 == 0 and point_on_segment(a, c, d):
        return True
    if o4 == 0 and point_on_segment(b, c, d):
        return True
    return False


def polygon_is_simple(polygon: Sequence[LatLon]) -> bool:
    """True if the closed ring has no self-intersections.

    Adjacent edges may touch at their shared vertex only; a fold-back spike
    over a neighbouring edge counts as an intersection.
    """
    n = len(polygon)
    if n < 3:
        return False
    for i in range(n):
        if polygon[i] == polygon[(i + 1) % n]:
            return False
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        for j in range(i + 1, n):
            c, d = edges[j]
            if j == i + 1 or (i == 0 and j == n - 1):
                far_i, far_j = (a, d) if j == i + 1 else (b, c)
                if point_on_segment(far_j, a, b) or point_on_segment(far_i, c, d):
                    return False
                continue
            if segments_intersect(a, b, c, d):
                return False
    return True


def meters_between(a: LatLon, b: LatLon) -> float:
    """Approximate ground distance in metres (equirectangular, fine at city scale)."""
    lat1, lon1 = a
    lat2, lon2 = b
    mean_lat = math.radians((lat1 + lat2) / 2.0)
    dx = math.radians(lon2 - lon1) * math.cos(mean_lat)
    dy = math.radians(lat2 - lat1)
    return math.hypot(dx, dy) * _EARTH_RADIUS_M
