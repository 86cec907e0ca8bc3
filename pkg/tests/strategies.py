"""Hypothesis strategies for small geometries on a coarse lon/lat grid.

The grid makes shared vertices, collinear edges and touching boundaries
common, which is where intersection bugs live.
"""
import math

from hypothesis import assume
from hypothesis import strategies as st

from georank import geometry as geo

LON0, LAT0 = -73.98, 40.75
STEP = 0.002  # about 170 m in latitude

grid = st.integers(-10, 10)


@st.composite
def coords(draw):
    return (round(LON0 + draw(grid) * STEP, 6), round(LAT0 + draw(grid) * STEP, 6))


@st.composite
def points(draw):
    return geo.Point(*draw(coords()))


@st.composite
def polylines(draw):
    cs = draw(st.lists(coords(), min_size=2, max_size=4))
    assume(len(set(cs)) >= 2)
    return geo.Polyline(tuple(cs))


def _star(cx, cy, radii, angles):
    ring = [
        (round(cx + r * math.cos(a), 6), round(cy + r * math.sin(a), 6))
        for r, a in zip(radii, angles)
    ]
    return ring + [ring[0]]


@st.composite
def polygons(draw, with_hole=None):
    cx, cy = draw(coords())
    n = draw(st.integers(3, 6))
    angles = sorted(draw(st.lists(st.floats(0, 2 * math.pi, exclude_max=True), min_size=n, max_size=n, unique=True)))
    radii = draw(st.lists(st.integers(2, 6), min_size=n, max_size=n))
    outer = _star(cx, cy, [r * STEP for r in radii], angles)
    hole = draw(st.booleans()) if with_hole is None else with_hole
    holes = (_star(cx, cy, [0.4 * r * STEP for r in radii], angles),) if hole else ()
    try:
        return geo.Polygon(tuple(outer), tuple(tuple(h) for h in holes))
    except geo.InvalidGeometry:
        assume(False)


simple = st.one_of(points(), polylines(), polygons())


@st.composite
def multis(draw):
    kind = draw(st.sampled_from(["mp", "ml", "mg"]))
    if kind == "mp":
        return geo.MultiPoint(tuple(draw(st.lists(coords(), min_size=1, max_size=3))))
    if kind == "ml":
        return geo.MultiPolyline(tuple(draw(st.lists(polylines(), min_size=1, max_size=2))))
    return geo.MultiPolygon(tuple(draw(st.lists(polygons(with_hole=False), min_size=1, max_size=2))))


any_geometry = st.one_of(simple, multis())
