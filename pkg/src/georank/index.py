"""Static R-tree over geometry bounding boxes.

Entries are bulk loaded in Hilbert-curve order of their box centres and packed
into leaves of ``leaf_capacity``; upper levels group consecutive nodes with the
same fan-out.  The box hierarchy is only a prefilter: every query finishes with
the exact geometry predicate, so results always equal a linear scan.
"""
from __future__ import annotations

import math
from typing import Hashable, Iterable, Mapping, Optional

import numpy as np

from . import geometry as geo
from .geometry import BBox, Geometry

LEAF_CAPACITY = 16
_HILBERT_ORDER = 16


class DuplicateIdError(ValueError):
    pass


def hilbert_key(x: np.ndarray, y: np.ndarray, order: int = _HILBERT_ORDER) -> np.ndarray:
    """Hilbert distance of integer cells ``(x, y)`` on a ``2**order`` grid."""
    n = 1 << order
    x = x.astype(np.int64).copy()
    y = y.astype(np.int64).copy()
    d = np.zeros_like(x)
    s = n >> 1
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx.astype(np.int64)) ^ ry.astype(np.int64))
        flip = ~ry & rx
        x = np.where(flip, n - 1 - x, x)
        y = np.where(flip, n - 1 - y, y)
        swap = ~ry
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        s >>= 1
    return d


def _overlaps(boxes: np.ndarray, q: BBox) -> np.ndarray:
    return ~(
        (boxes[:, 0] > q.max_lon)
        | (boxes[:, 2] < q.min_lon)
        | (boxes[:, 1] > q.max_lat)
        | (boxes[:, 3] < q.min_lat)
    )


class SpatialIndex:
    """Immutable packed R-tree mapping ids to geometries."""

    def __init__(self, ids, geoms, categories, entry_boxes, levels, leaf_capacity):
        self.ids: list = ids
        self.geometries: dict = geoms
        self.categories: dict = categories
        self._entry_boxes = entry_boxes  # (n, 4) in leaf order
        self._levels = levels  # node boxes, leaves first, root last
        self.leaf_capacity = leaf_capacity

    @classmethod
    def build(
        cls,
        entries: Iterable[tuple[Hashable, Geometry]],
        categories: Optional[Mapping[Hashable, str]] = None,
        leaf_capacity: int = LEAF_CAPACITY,
    ) -> "SpatialIndex":
        if leaf_capacity < 2:
            raise ValueError("leaf_capacity must be at least 2")
        entries = list(entries)
        geoms: dict = {}
        for key, g in entries:
            if key in geoms:
                raise DuplicateIdError(f"duplicate id {key!r}")
            geo.bbox(g)
            geoms[key] = g
        cats = dict(categories or {})
        if not entries:
            return cls([], geoms, cats, np.zeros((0, 4)), [], leaf_capacity)

        boxes = np.array(
            [(g.bbox.min_lon, g.bbox.min_lat, g.bbox.max_lon, g.bbox.max_lat) for _, g in entries],
            dtype=np.float64,
        )
        cx = (boxes[:, 0] + boxes[:, 2]) / 2
        cy = (boxes[:, 1] + boxes[:, 3]) / 2
        span = (1 << _HILBERT_ORDER) - 1

        def grid(v):
            lo, hi = v.min(), v.max()
            if hi == lo:
                return np.zeros(len(v), dtype=np.int64)
            return np.floor((v - lo) / (hi - lo) * span).astype(np.int64)

        keys = hilbert_key(grid(cx), grid(cy))
        # ties resolved by input position so builds are reproducible
        order = np.lexsort((np.arange(len(entries)), keys))
        ids = [entries[i][0] for i in order]
        boxes = boxes[order]

        levels = []
        lower = boxes
        while True:
            m = math.ceil(len(lower) / leaf_capacity)
            starts = np.arange(m) * leaf_capacity
            node = np.empty((m, 4))
            node[:, 0] = np.minimum.reduceat(lower[:, 0], starts)
            node[:, 1] = np.minimum.reduceat(lower[:, 1], starts)
            node[:, 2] = np.maximum.reduceat(lower[:, 2], starts)
            node[:, 3] = np.maximum.reduceat(lower[:, 3], starts)
            levels.append(node)
            if m == 1:
                break
            lower = node
        return cls(ids, geoms, cats, boxes, levels, leaf_capacity)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def height(self) -> int:
        return len(self._levels)

    def query_bbox(self, box: BBox) -> list:
        """Ids whose bounding box overlaps ``box`` (no exact test)."""
        if not self.ids:
            return []
        cap = self.leaf_capacity
        top = self._levels[-1]
        sel = np.flatnonzero(_overlaps(top, box))
        for level in range(len(self._levels) - 2, -1, -1):
            if sel.size == 0:
                return []
            n_lower = len(self._levels[level])
            kids = (sel[:, None] * cap + np.arange(cap)).ravel()
            kids = kids[kids < n_lower]
            sel = kids[_overlaps(self._levels[level][kids], box)]
        if sel.size == 0:
            return []
        kids = (sel[:, None] * cap + np.arange(cap)).ravel()
        kids = kids[kids < len(self.ids)]
        hits = kids[_overlaps(self._entry_boxes[kids], box)]
        return [self.ids[i] for i in hits]

    def _category_ok(self, key, category) -> bool:
        return category is None or self.categories.get(key) == category

    def query_within_distance(
        self, reference: Geometry, eps: float, category: Optional[str] = None
    ) -> set:
        """Ids within ``eps`` km of ``reference`` (boundary inclusive), optionally by category."""
        if eps < 0 or math.isnan(eps):
            raise ValueError(f"eps must be non-negative, got {eps}")
        box = geo.bbox(reference).expand_km(eps)
        return {
            k
            for k in self.query_bbox(box)
            if self._category_ok(k, category) and geo.within_buffer(self.geometries[k], reference, eps)
        }

    def query_contained(self, region: Geometry, category: Optional[str] = None) -> set:
        """Ids whose geometry lies entirely inside the areal ``region``."""
        if not isinstance(region, geo.AREAL):
            raise geo.InvalidGeometry("query_contained needs a Polygon or MultiPolygon region")
        return {
            k
            for k in self.query_bbox(region.bbox)
            if self._category_ok(k, category) and geo.contains(region, self.geometries[k])
        }

    def check_invariants(self) -> None:
        """Assert the structural invariants; used by the test-suite."""
        assert len(set(self.ids)) == len(self.ids) == len(self.geometries)
        if not self.ids:
            return
        cap = self.leaf_capacity
        lower = self._entry_boxes
        for node in self._levels:
            for i, box in enumerate(node):
                kids = lower[i * cap : (i + 1) * cap]
                assert (box[0] <= kids[:, 0]).all() and (box[1] <= kids[:, 1]).all()
                assert (box[2] >= kids[:, 2]).all() and (box[3] >= kids[:, 3]).all()
            assert len(node) == math.ceil(len(lower) / cap)
            lower = node
        assert len(self._levels[-1]) == 1


build = SpatialIndex.build
