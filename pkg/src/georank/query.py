"""Structured spatial queries and the deterministic question parser.

A :class:`SpatialQuery` names the query function (point radius, route buffer or
region containment), its reference geometries, the target category and the
distance parameter.  :func:`parse_rule_based` builds one from a question plus
already-resolved reference points, following a fixed decision table:

* exactly two points and route wording  -> route buffer
* a gazetteer region named in the text  -> region containment
* otherwise, at least one point         -> point radius
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from . import geometry as geo
from . import lexicon
from .geometry import Coord, Geometry, MultiPoint, Point, Polyline

KNOWN_CATEGORIES = ("restaurant", "hotel", "attraction", "amenity", "cafe")


class QueryKind(str, enum.Enum):
    POINT_RADIUS = "point"
    ROUTE_BUFFER = "route"
    REGION_CONTAIN = "region"


class UnresolvedReference(LookupError):
    """The question has no usable reference location."""


class NotFound(LookupError):
    """A reference token could not be resolved to a geometry."""


@dataclass(frozen=True)
class SpatialQuery:
    kind: QueryKind
    references: tuple
    target_category: Optional[str] = None
    eps_km: Optional[float] = None
    raw_question: str = ""
    region_name: Optional[str] = None

    def __post_init__(self):
        kind = QueryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        refs = tuple(self.references)
        object.__setattr__(self, "references", refs)
        if self.target_category is not None and self.target_category not in KNOWN_CATEGORIES:
            raise ValueError(f"unknown category {self.target_category!r}")
        if kind is QueryKind.REGION_CONTAIN:
            if len(refs) != 1 or not isinstance(refs[0], geo.AREAL):
                raise ValueError("region query needs exactly one areal reference")
            if self.eps_km is not None:
                raise ValueError("region query takes no distance")
            return
        if not (self.eps_km is not None and math.isfinite(self.eps_km) and self.eps_km > 0):
            raise ValueError(f"{kind.value} query needs a positive distance, got {self.eps_km}")
        if not refs or not all(isinstance(r, Point) for r in refs):
            raise ValueError(f"{kind.value} query needs point references")
        if kind is QueryKind.ROUTE_BUFFER:
            if len(refs) != 2:
                raise ValueError("route query needs exactly two points")
            if refs[0] == refs[1]:
                raise ValueError("route endpoints coincide")


@dataclass(frozen=True)
class QueryIntent:
    spatial_requirement: str = ""
    semantic_requirement: str = ""
    target_category: str = "restaurant"

    def __post_init__(self):
        if self.spatial_requirement is None or self.semantic_requirement is None:
            raise ValueError("intent texts may be empty but not absent")
        if self.target_category not in KNOWN_CATEGORIES:
            raise ValueError(f"unknown category {self.target_category!r}")


@dataclass(frozen=True)
class QueryPlan:
    """The index call a :class:`SpatialQuery` compiles to."""

    op: str  # "within_distance" | "contained"
    reference: Geometry
    eps_km: Optional[float] = None
    category: Optional[str] = None

    def execute(self, index) -> set:
        if self.op == "contained":
            return index.query_contained(self.reference, self.category)
        return index.query_within_distance(self.reference, self.eps_km, self.category)


# ---------------------------------------------------------------- epsilon

_UNIT_KM = {"km": 1.0, "kilometer": 1.0, "kilometers": 1.0, "kilometre": 1.0, "kilometres": 1.0,
            "m": 1e-3, "meter": 1e-3, "meters": 1e-3, "metre": 1e-3, "metres": 1e-3,
            "mi": 1.609344, "mile": 1.609344, "miles": 1.609344}
_EXPLICIT = re.compile(
    r"\b(?:within|radius of|buffer of)\s+(?:a\s+|an\s+)?(\d+(?:\.\d+)?)\s*"
    r"(km|kilometers?|kilometres?|mi|miles?|m|meters?|metres?)\b"
    r"|\b(\d+(?:\.\d+)?)\s*(km|kilometers?|kilometres?|mi|miles?|m|meters?|metres?)\s+(?:radius|buffer)\b",
    re.I,
)

POINT_DEFAULT_KM = 1.0
ROUTE_DEFAULT_KM = 2.0


def explicit_distance_km(question: str) -> Optional[float]:
    """A literal distance such as 'within 500 m' or '2 km radius', if present."""
    m = _EXPLICIT.search(question or "")
    if not m:
        return None
    value, unit = (m.group(1), m.group(2)) if m.group(1) else (m.group(3), m.group(4))
    km = float(value) * _UNIT_KM[unit.lower()]
    return km if km > 0 else None


def estimate_epsilon(question: str, kind: QueryKind) -> float:
    """Distance parameter in km from phrase cues, falling back to the kind default."""
    kind = QueryKind(kind)
    if kind is QueryKind.REGION_CONTAIN:
        raise ValueError("region queries carry no distance")
    explicit = explicit_distance_km(question)
    if explicit is not None:
        return explicit
    q = (question or "").lower()
    if kind is QueryKind.ROUTE_BUFFER:
        if re.search(r"\b(scenic|exploration|explore|exploring|sightseeing)\b", q):
            return 3.0
        if re.search(r"\b(walk|walks|walking|stroll|on foot)\b", q):
            return 1.0
        return ROUTE_DEFAULT_KM
    if re.search(r"\bnot too far\b", q):
        return 3.0
    if re.search(r"\bwalking distance\b", q):
        return 2.0
    if re.search(r"\bblocks?\b", q):
        return 1.5
    if re.search(r"\b(nearby|near|close|closer|closest)\b", q):
        return 1.0
    return POINT_DEFAULT_KM


# ------------------------------------------------------------- category


def classify_category(question: str) -> str:
    toks = set(lexicon.words(question))
    if toks & lexicon.RESTAURANT_TERMS:
        return "restaurant"
    if toks & lexicon.HOTEL_TERMS:
        return "hotel"
    if toks & lexicon.ATTRACTION_TERMS:
        return "attraction"
    return "restaurant"


def extract_intent(question: str, category: Optional[str] = None) -> QueryIntent:
    spatial, semantic = lexicon.split_by_cue(question)
    return QueryIntent(spatial, semantic, category or classify_category(question))


# ------------------------------------------------------------ references

_LITERAL = re.compile(r"^\s*\(?\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)?\s*$")
_LITERAL_IN_TEXT = re.compile(r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)")


def _name_lookup(source: Any, name: str) -> Optional[Geometry]:
    if source is None:
        return None
    getter = getattr(source, "geometry_by_name", None)
    if getter is not None:
        return getter(name)
    key = name.strip().lower()
    for k, v in source.items():
        if k.lower() == key:
            return v
    return None


def resolve_geometry(token: Any, gazetteer: Any = None, corpus: Any = None) -> Geometry:
    """Resolve a POI name, region name or literal ``(lon, lat)`` to a geometry.

    Lookup order is corpus POI name, then gazetteer region, then literal
    coordinates.  A literal yields a temporary point that is never stored.
    """
    if isinstance(token, (Coord, tuple, list)) and len(token) == 2:
        return Point(*geo.as_coord(token))
    if not isinstance(token, str) or not token.strip():
        raise NotFound(f"empty reference {token!r}")
    g = _name_lookup(corpus, token)
    if g is not None:
        return g
    g = _name_lookup(gazetteer, token)
    if g is not None:
        return g
    m = _LITERAL.match(token)
    if m:
        try:
            return Point(float(m.group(1)), float(m.group(2)))
        except geo.InvalidGeometry as exc:
            raise NotFound(f"bad coordinate literal {token!r}: {exc}") from exc
    raise NotFound(f"cannot resolve {token!r}")


def literal_points(question: str) -> list[Point]:
    out = []
    for m in _LITERAL_IN_TEXT.finditer(question or ""):
        try:
            out.append(Point(float(m.group(1)), float(m.group(2))))
        except geo.InvalidGeometry:
            continue
    return out


def find_region_mention(question: str, gazetteer: Any) -> Optional[tuple[str, Geometry]]:
    """Longest gazetteer name or alias appearing as whole words in the question."""
    if not gazetteer:
        return None
    finder = getattr(gazetteer, "find_mention", None)
    if finder is not None:
        return finder(question)
    text = (question or "").lower()
    best = None
    for name, poly in gazetteer.items():
        n = name.lower().strip()
        if n and re.search(r"(?<!\w)" + re.escape(n) + r"(?!\w)", text):
            if best is None or len(n) > len(best[0]):
                best = (n, poly)
    return best


# ---------------------------------------------------------------- parser


def decide_kind(point_count: int, region_mentioned: bool, route_wording: bool) -> QueryKind:
    """The query-type decision table used by both the rule parser and its tests."""
    if point_count == 2 and route_wording:
        return QueryKind.ROUTE_BUFFER
    if region_mentioned:
        return QueryKind.REGION_CONTAIN
    if point_count >= 1:
        return QueryKind.POINT_RADIUS
    raise UnresolvedReference("no reference point or region in the question")


def parse_rule_based(
    question: str,
    resolved_points: Sequence[Any],
    gazetteer: Any = None,
    region_hint: Optional[tuple[str, Geometry]] = None,
) -> tuple[SpatialQuery, QueryIntent]:
    """Deterministic question parser.

    ``resolved_points`` are coordinates (or :class:`Point` objects) of the
    references already matched by the caller; ``region_hint`` lets the caller
    supply a region resolved outside the question text.
    """
    if not question or not question.strip():
        raise ValueError("empty question")
    points = tuple(p if isinstance(p, Point) else Point(*geo.as_coord(p)) for p in resolved_points)
    region = region_hint or find_region_mention(question, gazetteer)
    kind = decide_kind(len(points), region is not None, lexicon.has_route_cue(question))
    intent = extract_intent(question)
    category = intent.target_category
    if kind is QueryKind.REGION_CONTAIN:
        sq = SpatialQuery(kind, (region[1],), category, None, question, region_name=region[0])
    else:
        sq = SpatialQuery(kind, points, category, estimate_epsilon(question, kind), question)
    return sq, intent


def to_candidate_query(sq: SpatialQuery) -> QueryPlan:
    if sq.kind is QueryKind.REGION_CONTAIN:
        return QueryPlan("contained", sq.references[0], None, sq.target_category)
    if sq.kind is QueryKind.ROUTE_BUFFER:
        a, b = sq.references
        return QueryPlan("within_distance", Polyline((a.coord, b.coord)), sq.eps_km, sq.target_category)
    if len(sq.references) == 1:
        ref = sq.references[0]
    else:
        ref = MultiPoint(tuple(p.coord for p in sq.references))
    return QueryPlan("within_distance", ref, sq.eps_km, sq.target_category)
