"""Geometry kernel on lon/lat degrees.

Footprints come in three families: points, polylines and polygons, each with a
multi variant.  All lengths are kilometres.  Point to point distance is the
haversine great-circle distance; when a segment is involved the closest point
on the segment is located in a local equirectangular frame and the haversine
distance to that foot point is returned.

Geometries are immutable and every function here is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence, Union

EARTH_RADIUS_KM = 6371.0088
KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0


class InvalidGeometry(ValueError):
    """Raised when a geometry violates its structural invariants."""


class Coord(NamedTuple):
    lon: float
    lat: float


def as_coord(value: Sequence[float]) -> Coord:
    """Validate a (lon, lat) pair and return it as a :class:`Coord`."""
    try:
        lon, lat = float(value[0]), float(value[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise InvalidGeometry(f"not a coordinate pair: {value!r}") from exc
    if not (math.isfinite(lon) and math.isfinite(lat)):
        raise InvalidGeometry(f"non-finite coordinate: {value!r}")
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise InvalidGeometry(f"coordinate out of range: {value!r}")
    return Coord(lon, lat)


@dataclass(frozen=True)
class BBox:
    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise InvalidGeometry(f"inverted bounding box: {self}")

    @classmethod
    def of(cls, coords: Iterable[Coord]) -> "BBox":
        lons, lats = zip(*coords)
        return cls(min(lons), min(lats), max(lons), max(lats))

    def intersects(self, other: "BBox") -> bool:
        return not (
            other.min_lon > self.max_lon
            or other.max_lon < self.min_lon
            or other.min_lat > self.max_lat
            or other.max_lat < self.min_lat
        )

    def contains(self, other: "BBox") -> bool:
        return (
            self.min_lon <= other.min_lon
            and self.min_lat <= other.min_lat
            and self.max_lon >= other.max_lon
            and self.max_lat >= other.max_lat
        )

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.min_lon, other.min_lon),
            min(self.min_lat, other.min_lat),
            max(self.max_lon, other.max_lon),
            max(self.max_lat, other.max_lat),
        )

    def expand_km(self, eps_km: float, margin: float = 1.05) -> "BBox":
        """Grow the box by ``eps_km`` on every side.

        The longitude pad is taken at the most poleward latitude of the grown
        box, and ``margin`` covers the gap between the spherical metric and
        the degree grid, so no point within ``eps_km`` falls outside.
        """
        if eps_km <= 0:
            return self
        dlat = eps_km / KM_PER_DEGREE * margin
        lo_lat = max(-90.0, self.min_lat - dlat)
        hi_lat = min(90.0, self.max_lat + dlat)
        cos_lat = math.cos(math.radians(max(abs(lo_lat), abs(hi_lat))))
        if cos_lat < 1e-6:
            return BBox(-180.0, lo_lat, 180.0, hi_lat)
        dlon = dlat / cos_lat
        return BBox(
            max(-180.0, self.min_lon - dlon), lo_lat, min(180.0, self.max_lon + dlon), hi_lat
        )

    @property
    def center(self) -> Coord:
        return Coord((self.min_lon + self.max_lon) / 2, (self.min_lat + self.max_lat) / 2)


def _dedupe(coords: Iterable[Coord]) -> tuple[Coord, ...]:
    out: list[Coord] = []
    for c in coords:
        if not out or out[-1] != c:
            out.append(c)
    return tuple(out)


# Geometry classes.  Each caches a decomposition into isolated points, segments,
# areal parts and one probe vertex per connected component; the predicates
# below work only on that decomposition.


@dataclass(frozen=True)
class _Geom:
    _points: tuple = field(init=False, repr=False, compare=False)
    _segments: tuple = field(init=False, repr=False, compare=False)
    _polygons: tuple = field(init=False, repr=False, compare=False)
    _probes: tuple = field(init=False, repr=False, compare=False)
    _bbox: BBox = field(init=False, repr=False, compare=False)

    dim = -1

    def _cache(self, points=(), segments=(), polygons=(), probes=(), bbox=None):
        object.__setattr__(self, "_points", tuple(points))
        object.__setattr__(self, "_segments", tuple(segments))
        object.__setattr__(self, "_polygons", tuple(polygons))
        object.__setattr__(self, "_probes", tuple(probes))
        object.__setattr__(self, "_bbox", bbox)

    @property
    def bbox(self) -> BBox:
        return self._bbox


@dataclass(frozen=True)
class Point(_Geom):
    lon: float
    lat: float

    dim = 0

    def __post_init__(self):
        c = as_coord((self.lon, self.lat))
        object.__setattr__(self, "lon", c.lon)
        object.__setattr__(self, "lat", c.lat)
        self._cache(points=(c,), probes=(c,), bbox=BBox(c.lon, c.lat, c.lon, c.lat))

    @property
    def coord(self) -> Coord:
        return Coord(self.lon, self.lat)


@dataclass(frozen=True)
class MultiPoint(_Geom):
    coords: tuple[Coord, ...]

    dim = 0

    def __post_init__(self):
        coords = tuple(as_coord(c) for c in self.coords)
        if not coords:
            raise InvalidGeometry("MultiPoint needs at least one point")
        object.__setattr__(self, "coords", coords)
        self._cache(points=coords, probes=coords, bbox=BBox.of(coords))


@dataclass(frozen=True)
class Polyline(_Geom):
    coords: tuple[Coord, ...]

    dim = 1

    def __post_init__(self):
        coords = _dedupe(as_coord(c) for c in self.coords)
        if len(coords) < 2:
            raise InvalidGeometry("Polyline needs at least two distinct vertices")
        object.__setattr__(self, "coords", coords)
        segs = tuple(zip(coords[:-1], coords[1:]))
        self._cache(segments=segs, probes=coords[:1], bbox=BBox.of(coords))


@dataclass(frozen=True)
class MultiPolyline(_Geom):
    lines: tuple[Polyline, ...]

    dim = 1

    def __post_init__(self):
        lines = tuple(ln if isinstance(ln, Polyline) else Polyline(ln) for ln in self.lines)
        if not lines:
            raise InvalidGeometry("MultiPolyline needs at least one line")
        object.__setattr__(self, "lines", lines)
        box = lines[0].bbox
        for ln in lines[1:]:
            box = box.union(ln.bbox)
        self._cache(
            segments=[s for ln in lines for s in ln._segments],
            probes=[ln.coords[0] for ln in lines],
            bbox=box,
        )


def _check_ring(ring: tuple[Coord, ...], what: str) -> tuple[Coord, ...]:
    if len(ring) < 2 or ring[0] != ring[-1]:
        raise InvalidGeometry(f"{what} ring is not closed")
    ring = _dedupe(ring)
    if len(ring) < 4:
        raise InvalidGeometry(f"{what} ring needs at least 4 vertices (closed)")
    edges = list(zip(ring[:-1], ring[1:]))
    n = len(edges)
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            a, b = edges[i]
            c, d = edges[j]
            if adjacent:
                # adjacent edges may only share their common vertex
                if _orient(a, b, d if j == i + 1 else c) == 0 and _collinear_overlap(a, b, c, d):
                    raise InvalidGeometry(f"{what} ring folds back on itself")
            elif _segments_intersect(a, b, c, d):
                raise InvalidGeometry(f"{what} ring self-intersects")
    return ring


def _collinear_overlap(a, b, c, d) -> bool:
    """True when collinear segments ab and cd overlap in more than a point."""
    if _orient(a, b, c) != 0 or _orient(a, b, d) != 0:
        return False
    if a.lon != b.lon:
        lo1, hi1 = sorted((a.lon, b.lon))
        lo2, hi2 = sorted((c.lon, d.lon))
    else:
        lo1, hi1 = sorted((a.lat, b.lat))
        lo2, hi2 = sorted((c.lat, d.lat))
    return min(hi1, hi2) - max(lo1, lo2) > 0


@dataclass(frozen=True)
class Polygon(_Geom):
    outer: tuple[Coord, ...]
    holes: tuple[tuple[Coord, ...], ...] = ()

    dim = 2

    def __post_init__(self):
        outer = _check_ring(tuple(as_coord(c) for c in self.outer), "outer")
        holes = tuple(
            _check_ring(tuple(as_coord(c) for c in h), "hole") for h in self.holes
        )
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "holes", holes)
        segs = [s for ring in (outer, *holes) for s in zip(ring[:-1], ring[1:])]
        self._cache(segments=segs, polygons=(self,), probes=outer[:1], bbox=BBox.of(outer))

    @property
    def rings(self) -> tuple[tuple[Coord, ...], ...]:
        return (self.outer, *self.holes)


@dataclass(frozen=True)
class MultiPolygon(_Geom):
    polygons: tuple[Polygon, ...]

    dim = 2

    def __post_init__(self):
        polys = tuple(
            p if isinstance(p, Polygon) else Polygon(p[0], tuple(p[1:])) for p in self.polygons
        )
        if not polys:
            raise InvalidGeometry("MultiPolygon needs at least one polygon")
        object.__setattr__(self, "polygons", polys)
        box = polys[0].bbox
        for p in polys[1:]:
            box = box.union(p.bbox)
        self._cache(
            segments=[s for p in polys for s in p._segments],
            polygons=polys,
            probes=[p.outer[0] for p in polys],
            bbox=box,
        )


Geometry = Union[Point, MultiPoint, Polyline, MultiPolyline, Polygon, MultiPolygon]
AREAL = (Polygon, MultiPolygon)


# Planar primitives.  Orientation and crossing tests run directly on degrees:
# the local equirectangular projection is affine, so incidence is unchanged.


def _orient(a: Coord, b: Coord, c: Coord) -> float:
    v = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
    return (v > 0) - (v < 0)


def _on_segment(p: Coord, a: Coord, b: Coord) -> bool:
    return (
        _orient(a, b, p) == 0
        and min(a.lon, b.lon) <= p.lon <= max(a.lon, b.lon)
        and min(a.lat, b.lat) <= p.lat <= max(a.lat, b.lat)
    )


def _segments_intersect(a: Coord, b: Coord, c: Coord, d: Coord) -> bool:
    """Closed segment intersection, touching and collinear overlap included."""
    if (
        max(a.lon, b.lon) < min(c.lon, d.lon)
        or max(c.lon, d.lon) < min(a.lon, b.lon)
        or max(a.lat, b.lat) < min(c.lat, d.lat)
        or max(c.lat, d.lat) < min(a.lat, b.lat)
    ):
        return False
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and _on_segment(c, a, b):
        return True
    if o2 == 0 and _on_segment(d, a, b):
        return True
    if o3 == 0 and _on_segment(a, c, d):
        return True
    if o4 == 0 and _on_segment(b, c, d):
        return True
    return False


def _segments_cross_properly(a: Coord, b: Coord, c: Coord, d: Coord) -> bool:
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def _in_ring(p: Coord, ring: tuple[Coord, ...]) -> bool:
    """Even-odd ray cast; boundary behaviour is left to the caller."""
    inside = False
    x, y = p.lon, p.lat
    for a, b in zip(ring[:-1], ring[1:]):
        if (a.lat > y) != (b.lat > y):
            xc = a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            if x < xc:
                inside = not inside
    return inside


def _on_ring(p: Coord, ring: tuple[Coord, ...]) -> bool:
    return any(_on_segment(p, a, b) for a, b in zip(ring[:-1], ring[1:]))


def _point_in_polygon(p: Coord, poly: Polygon) -> bool:
    """Closed membership: boundary (outer and hole rings) counts as inside."""
    b = poly.bbox
    if not (b.min_lon <= p.lon <= b.max_lon and b.min_lat <= p.lat <= b.max_lat):
        return False
    if any(_on_ring(p, r) for r in poly.rings):
        return True
    if not _in_ring(p, poly.outer):
        return False
    return not any(_in_ring(p, h) for h in poly.holes)


def _point_strictly_in_polygon(p: Coord, poly: Polygon) -> bool:
    if any(_on_ring(p, r) for r in poly.rings):
        return False
    return _in_ring(p, poly.outer) and not any(_in_ring(p, h) for h in poly.holes)


# Metric primitives.


def haversine_km(a: Coord, b: Coord) -> float:
    """Great-circle distance in km on a sphere of mean Earth radius."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def point_segment_km(p: Coord, a: Coord, b: Coord) -> float:
    # frame centred between the point and the segment midpoint
    k = math.cos(math.radians((p.lat + (a.lat + b.lat) / 2) / 2))
    ax, ay = (a.lon - p.lon) * k, a.lat - p.lat
    dx, dy = (b.lon - a.lon) * k, b.lat - a.lat
    den = dx * dx + dy * dy
    t = 0.0 if den == 0 else min(1.0, max(0.0, -(ax * dx + ay * dy) / den))
    foot = Coord(a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat))
    return haversine_km(p, foot)


def _segment_segment_km(a: Coord, b: Coord, c: Coord, d: Coord) -> float:
    # only called on non-intersecting pairs, where an endpoint is always closest
    return min(
        point_segment_km(a, c, d),
        point_segment_km(b, c, d),
        point_segment_km(c, a, b),
        point_segment_km(d, a, b),
    )


def _check(g: Any) -> None:
    if not isinstance(g, _Geom) or type(g) is _Geom:
        raise InvalidGeometry(f"not a geometry: {g!r}")


# Public predicates.


def bbox(g: Geometry) -> BBox:
    _check(g)
    return g.bbox


def intersects(a: Geometry, b: Geometry) -> bool:
    """True iff the two footprints share at least one point."""
    _check(a)
    _check(b)
    if not a.bbox.intersects(b.bbox):
        return False
    bpts = set(b._points)
    if any(p in bpts for p in a._points):
        return True
    for p in a._points:
        if any(_on_segment(p, s, e) for s, e in b._segments):
            return True
    for p in b._points:
        if any(_on_segment(p, s, e) for s, e in a._segments):
            return True
    for s1, e1 in a._segments:
        for s2, e2 in b._segments:
            if _segments_intersect(s1, e1, s2, e2):
                return True
    for p in a._probes:
        if any(_point_in_polygon(p, poly) for poly in b._polygons):
            return True
    for p in b._probes:
        if any(_point_in_polygon(p, poly) for poly in a._polygons):
            return True
    return False


def distance(a: Geometry, b: Geometry) -> float:
    """Shortest distance in km between two footprints; exactly 0 iff they intersect."""
    if intersects(a, b):
        return 0.0
    best = math.inf
    for p in a._points:
        for q in b._points:
            best = min(best, haversine_km(p, q))
        for s, e in b._segments:
            best = min(best, point_segment_km(p, s, e))
    for q in b._points:
        for s, e in a._segments:
            best = min(best, point_segment_km(q, s, e))
    for s1, e1 in a._segments:
        for s2, e2 in b._segments:
            best = min(best, _segment_segment_km(s1, e1, s2, e2))
    return best


def within_buffer(target: Geometry, reference: Geometry, eps: float) -> bool:
    """Boundary-inclusive buffer membership: ``distance(target, reference) <= eps``."""
    if eps < 0 or math.isnan(eps):
        raise ValueError(f"buffer distance must be non-negative, got {eps}")
    return distance(target, reference) <= eps


def _components(g: Geometry) -> list[Geometry]:
    if isinstance(g, MultiPoint):
        return [Point(*c) for c in g.coords]
    if isinstance(g, MultiPolyline):
        return list(g.lines)
    if isinstance(g, MultiPolygon):
        return list(g.polygons)
    return [g]


def _polygon_contains(poly: Polygon, g: Geometry) -> bool:
    if not poly.bbox.contains(g.bbox):
        return False
    if isinstance(g, Point):
        return _point_in_polygon(g.coord, poly)
    verts = g.coords if isinstance(g, Polyline) else g.outer
    if not all(_point_in_polygon(v, poly) for v in verts):
        return False
    for s, e in g._segments:
        mid = Coord((s.lon + e.lon) / 2, (s.lat + e.lat) / 2)
        if not _point_in_polygon(mid, poly):
            return False
        for s2, e2 in poly._segments:
            if _segments_cross_properly(s, e, s2, e2):
                return False
    if isinstance(g, Polygon):
        # a hole of the container sitting inside the target punctures it
        for hole in poly.holes:
            if any(_point_strictly_in_polygon(v, g) for v in hole):
                return False
    return True


def contains(polygon: Geometry, target: Geometry) -> bool:
    """True iff ``target`` lies entirely within the areal ``polygon`` (holes excluded)."""
    _check(polygon)
    _check(target)
    if not isinstance(polygon, AREAL):
        raise InvalidGeometry(f"contains() needs an areal container, got {type(polygon).__name__}")
    parts = polygon._polygons
    return all(any(_polygon_contains(p, c) for p in parts) for c in _components(target))


def representative_point(g: Geometry) -> Point:
    """A point on or inside ``g``, used when a footprint must act as a single location."""
    _check(g)
    if isinstance(g, Point):
        return g
    if g._polygons:
        c = g.bbox.center
        if any(_point_in_polygon(c, p) for p in g._polygons):
            return Point(*c)
    if g._segments and not g._polygons:
        s, e = g._segments[len(g._segments) // 2]
        return Point((s.lon + e.lon) / 2, (s.lat + e.lat) / 2)
    return Point(*g._probes[0])


def offset(origin: Coord, east_km: float, north_km: float) -> Coord:
    """Move ``origin`` by a small planar displacement in km (local equirectangular)."""
    lat = origin.lat + north_km / KM_PER_DEGREE
    lon = origin.lon + east_km / (KM_PER_DEGREE * math.cos(math.radians(origin.lat)))
    return Coord(lon, lat)


def circle(center: Coord, radius_km: float, n: int = 64) -> Polygon:
    """Polygon approximating the ``radius_km`` ring around ``center``."""
    ring = [
        offset(center, radius_km * math.cos(2 * math.pi * i / n), radius_km * math.sin(2 * math.pi * i / n))
        for i in range(n)
    ]
    return Polygon(tuple(ring) + (ring[0],))


# GeoJSON round trip.


def from_geojson(obj: dict) -> Geometry:
    try:
        kind, coords = obj["type"], obj["coordinates"]
    except (KeyError, TypeError) as exc:
        raise InvalidGeometry(f"malformed GeoJSON geometry: {obj!r}") from exc
    if kind == "Point":
        return Point(*as_coord(coords))
    if kind == "MultiPoint":
        return MultiPoint(tuple(coords))
    if kind == "LineString":
        return Polyline(tuple(coords))
    if kind == "MultiLineString":
        return MultiPolyline(tuple(Polyline(tuple(ln)) for ln in coords))
    if kind == "Polygon":
        if not coords:
            raise InvalidGeometry("Polygon without rings")
        return Polygon(tuple(coords[0]), tuple(tuple(h) for h in coords[1:]))
    if kind == "MultiPolygon":
        return MultiPolygon(
            tuple(Polygon(tuple(p[0]), tuple(tuple(h) for h in p[1:])) for p in coords)
        )
    raise InvalidGeometry(f"unsupported GeoJSON type {kind!r}")


def _ring_json(ring):
    return [[c.lon, c.lat] for c in ring]


def to_geojson(g: Geometry) -> dict:
    _check(g)
    if isinstance(g, Point):
        return {"type": "Point", "coordinates": [g.lon, g.lat]}
    if isinstance(g, MultiPoint):
        return {"type": "MultiPoint", "coordinates": _ring_json(g.coords)}
    if isinstance(g, Polyline):
        return {"type": "LineString", "coordinates": _ring_json(g.coords)}
    if isinstance(g, MultiPolyline):
        return {"type": "MultiLineString", "coordinates": [_ring_json(ln.coords) for ln in g.lines]}
    if isinstance(g, Polygon):
        return {"type": "Polygon", "coordinates": [_ring_json(r) for r in g.rings]}
    return {
        "type": "MultiPolygon",
        "coordinates": [[_ring_json(r) for r in p.rings] for p in g.polygons],
    }
