"""
Distances, buffers and containment
==================================

A short tour of the geometry layer: great-circle distance, the distance from
a point to a street segment, and the three spatial predicates used for
retrieval.
"""

from dataclasses import astuple

import numpy as np

from georank import geometry as geo

# a corner in midtown and a point 1 km north-east of it
corner = geo.Point(-73.985, 40.758)
ne = geo.Point(*geo.offset(corner.coord, 0.7071, 0.7071))
print("corner to ne: %.4f km" % geo.distance(corner, ne))

# one degree of latitude anywhere on the sphere
print("one degree of latitude: %.3f km" % geo.haversine_km(geo.Coord(0, 0), geo.Coord(0, 1)))

# a street running east-west, and a cafe 300 m south of its middle
street = geo.Polyline((geo.Coord(-73.99, 40.75), geo.Coord(-73.97, 40.75)))
cafe = geo.Point(*geo.offset(geo.Coord(-73.98, 40.75), 0.0, -0.3))
print("cafe to street: %.4f km" % geo.distance(cafe, street))

# buffer membership on either side of the 300 m mark
for eps in (0.2, 0.4):
    print("  within %.2f km of the street? %s" % (eps, geo.within_buffer(cafe, street, eps)))

# a neighbourhood as a 1.2 km disc (32-gon), with a hole for a park
hood = geo.circle(geo.Coord(-73.98, 40.755), 1.2, 32)
park = geo.circle(geo.Coord(-73.98, 40.755), 0.3, 16)
hood = geo.Polygon(hood.outer, (tuple(reversed(park.outer)),))
for name, p in [("corner", corner), ("cafe", cafe), ("park center", geo.Point(-73.98, 40.755))]:
    print("%-12s in neighbourhood: %s" % (name, geo.contains(hood, p)))

# the bounding box grows with the buffer, which is what the index searches
box = geo.bbox(street)
print("street bbox:     ", np.round(astuple(box), 5))
print("1 km buffer bbox:", np.round(astuple(box.expand_km(1.0)), 5))

# shapes travel as GeoJSON
print(geo.to_geojson(street))
