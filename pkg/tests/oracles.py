"""Reference computations written independently of the package under test.

They favour directness over speed: unit-vector chord distances instead of
haversine, golden-section search instead of a closed-form foot point, pairwise
dominance instead of a sweep, and a from-scratch feature-hash encoder.
"""
from __future__ import annotations

import hashlib
import math
import re

import numpy as np

R_KM = 6371.0088


def unit(lon, lat):
    lo, la = np.radians(lon), np.radians(lat)
    return np.stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)], axis=-1)


def chord_km(lon1, lat1, lon2, lat2):
    """Great-circle distance from the straight-line chord between unit vectors."""
    c = np.linalg.norm(unit(lon1, lat1) - unit(lon2, lat2), axis=-1)
    return 2 * R_KM * np.arcsin(np.minimum(c / 2, 1.0))


def point_segment_search_km(p, a, b, iters: int = 100) -> float:
    """Min great-circle distance from p to the lon/lat-linear segment a-b by golden-section search."""
    def f(t):
        return float(chord_km(p[0], p[1], a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))

    lo, hi = 0.0, 1.0
    g = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = f(x2)
    return min(f(0.0), f(1.0), f1, f2)


def scan_point_segment_km(lon, lat, a, b):
    """Vectorised linear-scan version of the documented point-segment rule.

    Foot of the perpendicular in an equirectangular frame whose scale is the
    cosine of the mean of the point latitude and segment-midpoint latitude,
    then great-circle distance to that foot.
    """
    k = np.cos(np.radians((lat + (a[1] + b[1]) / 2) / 2))
    ax, ay = (a[0] - lon) * k, a[1] - lat
    dx, dy = (b[0] - a[0]) * k, b[1] - a[1]
    t = np.clip(-(ax * dx + ay * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return haversine_np(lon, lat, a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def haversine_np(lon1, lat1, lon2, lat2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    h = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(np.radians(lon2 - lon1) / 2) ** 2
    return 2 * R_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def scan_in_ring(lon, lat, ring) -> np.ndarray:
    """Vectorised even-odd crossing count against a closed ring (list of (lon, lat))."""
    ring = np.asarray(ring, dtype=float)
    inside = np.zeros(np.shape(lon), dtype=bool)
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        straddle = (y1 > lat) != (y2 > lat)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddle & (lon < xc)
    return inside


def segments_cross(p1, p2, q1, q2) -> bool:
    """Closed segment intersection by parametric solve (independent of orientation tests)."""
    (x1, y1), (x2, y2), (x3, y3), (x4, y4) = p1, p2, q1, q2
    den = (x2 - x1) * (y4 - y3) - (y2 - y1) * (x4 - x3)
    if den == 0:
        # parallel: overlap only if collinear and projections overlap
        cross = (x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)
        if cross != 0:
            return False
        def proj(x, y):
            return x * (x2 - x1) + y * (y2 - y1) if (x1, y1) != (x2, y2) else x * (x4 - x3) + y * (y4 - y3)
        a0, a1 = sorted([proj(x1, y1), proj(x2, y2)])
        b0, b1 = sorted([proj(x3, y3), proj(x4, y4)])
        return a0 <= b1 and b0 <= a1
    t = ((x3 - x1) * (y4 - y3) - (y3 - y1) * (x4 - x3)) / den
    u = ((x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)) / den
    return 0 <= t <= 1 and 0 <= u <= 1


def dominance_frontier(points: np.ndarray) -> np.ndarray:
    """Boolean mask of rows not dominated by any other row (O(n^2))."""
    p = np.asarray(points, dtype=float)
    ge = (p[:, None, :] >= p[None, :, :]).all(-1)
    gt = (p[:, None, :] > p[None, :, :]).any(-1)
    dominated = (ge & gt).any(0)
    return ~dominated


def hash_embed(text: str, dim: int = 256) -> np.ndarray:
    """Signed feature hashing of lowercase word unigrams, L2-normalised."""
    v = np.zeros(dim)
    for tok in re.findall(r"[^\W_]+", text.lower()):
        h = int.from_bytes(hashlib.blake2b(tok.encode(), digest_size=8).digest(), "little")
        v[h % dim] += -1.0 if h >> 63 else 1.0
    n = math.sqrt(float(v @ v))
    return v / n if n else v


def cos(u, v) -> float:
    nu, nv = math.sqrt(float(np.dot(u, u))), math.sqrt(float(np.dot(v, v)))
    return 0.0 if nu == 0 or nv == 0 else float(np.dot(u, v)) / (nu * nv)


def metrics(ranked, relevant, k):
    """(precision, recall, f1, ndcg) written out longhand."""
    top = ranked[:k]
    hits = len([r for r in top if r in relevant])
    denom = min(k, len(ranked))
    p = hits / denom if denom else 0.0
    r = hits / len(relevant)
    f = 0.0 if p == 0 or r == 0 else 2 / (1 / p + 1 / r)
    dcg = 0.0
    for i, item in enumerate(top, start=1):
        if item in relevant:
            dcg += 1 / math.log(i + 1, 2)
    ideal = 0.0
    for i in range(1, min(k, len(relevant)) + 1):
        ideal += 1 / math.log(i + 1, 2)
    return p, r, f, dcg / ideal


def _parts(gj):
    """Split a GeoJSON geometry into (points, segments, polygons-as-ring-lists)."""
    t, c = gj["type"], gj["coordinates"]
    if t == "Point":
        return [tuple(c)], [], []
    if t == "MultiPoint":
        return [tuple(p) for p in c], [], []
    lines = [c] if t == "LineString" else c if t == "MultiLineString" else []
    polys = [c] if t == "Polygon" else c if t == "MultiPolygon" else []
    segs = [(tuple(a), tuple(b)) for ln in lines for a, b in zip(ln[:-1], ln[1:])]
    segs += [(tuple(a), tuple(b)) for p in polys for ring in p for a, b in zip(ring[:-1], ring[1:])]
    verts = [tuple(v) for ln in lines for v in ln] + [tuple(v) for p in polys for v in p[0]]
    return verts, segs, polys


def _on_seg(p, a, b) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    return cross == 0 and min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def _strictly_inside(p, poly) -> bool:
    lon, lat = np.array([p[0]]), np.array([p[1]])
    if not scan_in_ring(lon, lat, poly[0])[0]:
        return False
    return not any(scan_in_ring(lon, lat, h)[0] for h in poly[1:])


def brute_intersects(gj_a, gj_b) -> bool:
    """All pairs of primitives: point/point, point/segment, segment/segment, vertex/interior."""
    va, sa, pa = _parts(gj_a)
    vb, sb, pb = _parts(gj_b)
    if set(va) & set(vb):
        return True
    if any(_on_seg(p, a, b) for p in va for a, b in sb) or any(_on_seg(p, a, b) for p in vb for a, b in sa):
        return True
    if any(segments_cross(a, b, c, d) for a, b in sa for c, d in sb):
        return True
    return any(_strictly_inside(v, poly) for v in va for poly in pb) or any(
        _strictly_inside(v, poly) for v in vb for poly in pa
    )
