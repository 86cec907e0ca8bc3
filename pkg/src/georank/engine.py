"""The end-to-end ranking pipeline and its configuration.

parse -> spatial candidates -> dense spatial score -> semantic filter and
score -> fused spatial score -> trade-off weights -> frontier -> selection
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional, Sequence

from . import geometry as geo
from .dsl import parse_dsl
from .embedding import HashEmbedder, LexiconMasker, ServiceEmbedder
from .evaluation import DEFAULT_KS
from .llm import ChatGateway, GatewayError, HttpChatTransport, StubTransport, offline_reply, parse_with_llm
from .query import (
    QueryIntent,
    QueryKind,
    SpatialQuery,
    UnresolvedReference,
    literal_points,
    parse_rule_based,
    resolve_geometry,
    to_candidate_query,
)
from .ranking import (
    NoAnswer,
    ParetoPoint,
    TradeoffWeights,
    heuristic_weights,
    llm_rerank,
    pareto_frontier,
    select,
)
from .retrieval import CandidateScores, fuse_spatial, retrieve_sparse, score_dense_spatial, score_semantic

log = logging.getLogger(__name__)

PARSERS = ("rule", "llm", "dsl")
WEIGHT_POLICIES = ("heuristic", "fixed", "llm")
EMBEDDERS = ("hash", "service")


@dataclass
class EngineConfig:
    store: Optional[str] = None
    parser: str = "rule"
    embedder: str = "hash"
    embedding_url: Optional[str] = None
    embedding_model: str = "text-embedding-3-small"
    embedding_dim: int = 256
    lambda_p: float = 0.5
    lambda_d: float = 0.5
    weights: str = "heuristic"
    lambda_fixed: tuple[float, float] = (0.5, 0.5)
    topk: int = 10
    ks: tuple[int, ...] = DEFAULT_KS
    gateway_url: Optional[str] = None
    gateway_model: str = "gpt-4o-mini"
    distance_scale_km: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.parser not in PARSERS:
            raise ValueError(f"parser must be one of {PARSERS}, got {self.parser!r}")
        if self.weights not in WEIGHT_POLICIES:
            raise ValueError(f"weights must be one of {WEIGHT_POLICIES}, got {self.weights!r}")
        if self.embedder not in EMBEDDERS:
            raise ValueError(f"embedder must be one of {EMBEDDERS}, got {self.embedder!r}")
        if self.lambda_p < 0 or self.lambda_d < 0 or self.lambda_p + self.lambda_d == 0:
            raise ValueError("lambda_p and lambda_d must be non-negative and not both zero")
        TradeoffWeights(*self.lambda_fixed)
        if self.topk < 1 or not self.ks or min(self.ks) < 1:
            raise ValueError("topk and k values must be positive")
        if self.distance_scale_km <= 0:
            raise ValueError("distance_scale_km must be positive")
        if self.embedder == "service" and not self.embedding_url:
            raise ValueError("the service embedder needs embedding_url")
        if self.parser == "llm" or self.weights == "llm":
            if not self.gateway_url:
                raise ValueError("llm parser or weights need gateway_url ('offline' for the built-in stub)")

    def updated(self, **changes) -> "EngineConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def make_embedder(config: EngineConfig):
    if config.embedder == "hash":
        return HashEmbedder(config.embedding_dim)
    return ServiceEmbedder(config.embedding_url, config.embedding_model, config.embedding_dim)


def make_gateway(config: EngineConfig) -> Optional[ChatGateway]:
    """``offline`` selects the deterministic rule-based stub; anything else is a chat endpoint URL."""
    if not config.gateway_url:
        return None
    if config.gateway_url == "offline":
        return ChatGateway(StubTransport(offline_reply))
    return ChatGateway(HttpChatTransport(config.gateway_url, config.gateway_model))


@dataclass(frozen=True)
class RankedCandidate:
    poi_id: str
    distance_km: float
    f_sparse: float
    f_dense_spatial: float
    f_spatial: float
    f_semantic: float
    on_frontier: bool = False
    score: float = 0.0


@dataclass
class QueryResult:
    query: SpatialQuery
    intent: Optional[QueryIntent]
    parse_mode: str
    candidate_count: int = 0
    candidates: list[RankedCandidate] = field(default_factory=list)
    weights: Optional[TradeoffWeights] = None
    frontier: list[str] = field(default_factory=list)
    ranking: list[str] = field(default_factory=list)
    reranked_by_llm: bool = False
    stage_reached: str = "parse"
    message: str = ""


class Engine:
    def __init__(self, corpus, config: Optional[EngineConfig] = None, embedder=None, masker=None,
                 gateway: Optional[ChatGateway] = None):
        self.corpus = corpus
        self.config = config or EngineConfig()
        self.embedder = embedder or make_embedder(self.config)
        self.masker = masker or LexiconMasker()
        self.gateway = gateway if gateway is not None else make_gateway(self.config)
        if corpus.dimension and self.embedder.dimension != corpus.dimension:
            raise ValueError(
                f"embedder dimension {self.embedder.dimension} does not match the store ({corpus.dimension})"
            )

    # ------------------------------------------------------------ parsing

    def resolve_references(self, question: str, tokens: Sequence[Any] = ()) -> tuple[list, Optional[tuple]]:
        """Reference points and an optional region from explicit tokens or the question text.

        Non-point POI footprints are reduced to a representative point.
        """
        points, region = [], None
        if tokens:
            for t in tokens:
                g = resolve_geometry(t, self.corpus.gazetteer, self.corpus)
                if isinstance(g, geo.AREAL) and self.corpus.gazetteer.geometry_by_name(str(t)) is g:
                    region = (str(t).lower(), g)
                elif isinstance(g, geo.Point):
                    points.append(g)
                else:
                    points.append(geo.representative_point(g))
            return points, region
        for r in self.corpus.find_name_mentions(question):
            g = r.geometry
            points.append(g if isinstance(g, geo.Point) else geo.representative_point(g))
        points.extend(literal_points(question))
        return points, None

    def parse(self, question: Optional[str] = None, references: Sequence[Any] = (),
              dsl: Optional[str] = None) -> tuple[SpatialQuery, Optional[QueryIntent], str]:
        if dsl is not None or self.config.parser == "dsl":
            text = dsl if dsl is not None else question
            sq = parse_dsl(text, self.corpus.gazetteer)
            intent = QueryIntent("", "", sq.target_category) if sq.target_category else None
            return sq, intent, "dsl"
        points, region = self.resolve_references(question, references)
        if self.config.parser == "llm":
            try:
                sq, intent = parse_with_llm(question, points, self.corpus.gazetteer, self.gateway)
                return sq, intent, "llm"
            except (GatewayError, UnresolvedReference, ValueError) as exc:
                log.warning("llm parse failed (%s); using the rule parser", exc)
                sq, intent = parse_rule_based(question, points, self.corpus.gazetteer, region)
                return sq, intent, "rule (llm fallback)"
        sq, intent = parse_rule_based(question, points, self.corpus.gazetteer, region)
        return sq, intent, "rule"

    # ------------------------------------------------------------ ranking

    def _weights(self, intent: Optional[QueryIntent]) -> TradeoffWeights:
        if self.config.weights == "fixed":
            return TradeoffWeights(*self.config.lambda_fixed)
        return heuristic_weights(intent or QueryIntent())

    def rank(self, sq: SpatialQuery, intent: Optional[QueryIntent], question: str,
             parse_mode: str = "given", top_k: Optional[int] = None) -> QueryResult:
        cfg = self.config
        top_k = top_k or cfg.topk
        result = QueryResult(sq, intent, parse_mode)
        sparse = retrieve_sparse(sq, self.corpus.index, self.corpus, cfg.distance_scale_km)
        result.candidate_count = len(sparse)
        result.stage_reached = "retrieval"
        if not sparse:
            result.message = "no candidate satisfies the spatial constraint"
            return result
        dense = score_dense_spatial(question, sparse, self.corpus, self.embedder, self.masker)
        scored: list[CandidateScores] = score_semantic(question, dense, self.corpus, self.embedder, self.masker, intent)
        result.stage_reached = "semantic"
        if not scored:
            result.message = "no candidate matches the target category"
            return result
        f_s = {c.poi_id: fuse_spatial(c.f_sparse, c.f_dense_spatial, cfg.lambda_p, cfg.lambda_d) for c in scored}
        f_k = {c.poi_id: c.f_semantic for c in scored}
        weights = self._weights(intent)
        frontier = pareto_frontier([ParetoPoint(i, f_s[i], f_k[i]) for i in f_s], weights)
        front_ids = {p.poi_id for p in frontier}
        result.weights = weights
        result.frontier = [p.poi_id for p in frontier]
        result.candidates = [
            RankedCandidate(c.poi_id, c.distance_km, c.f_sparse, c.f_dense_spatial, f_s[c.poi_id], c.f_semantic,
                            c.poi_id in front_ids, weights.score(f_s[c.poi_id], f_k[c.poi_id]))
            for c in scored
        ]
        result.stage_reached = "frontier"

        def weighted():
            return select(frontier, f_s, f_k, weights, None)

        try:
            if cfg.weights == "llm" and self.gateway is not None:
                by_id = {c.poi_id: c for c in result.candidates}
                ordered_front = [i for i in weighted() if i in front_ids]
                payload = [self._place(by_id[i]) for i in ordered_front]
                head, used = llm_rerank(payload, intent or QueryIntent(), self.gateway,
                                        lambda: ordered_front)
                rest = [i for i in weighted() if i not in front_ids]
                ranking = head + rest
                result.reranked_by_llm = used
            else:
                ranking = weighted()
        except NoAnswer as exc:
            result.message = str(exc)
            return result
        result.ranking = ranking[:top_k]
        result.stage_reached = "selection"
        return result

    def _place(self, c: RankedCandidate) -> dict:
        r = self.corpus.record(c.poi_id)
        return {
            "poi_id": c.poi_id,
            "name": r.name,
            "category": r.category,
            "distance_km": round(c.distance_km, 4),
            "spatial_score": round(c.f_sparse, 4),
            "description": r.description,
        }

    def run(self, question: Optional[str] = None, references: Sequence[Any] = (), dsl: Optional[str] = None,
            top_k: Optional[int] = None) -> QueryResult:
        sq, intent, mode = self.parse(question, references, dsl)
        text = "" if mode == "dsl" else question
        return self.rank(sq, intent, text, mode, top_k)

    # ------------------------------------------------------------ evaluation hooks

    def query_for(self, qa) -> SpatialQuery:
        return self.parse(qa.question, qa.references)[0]

    def rank_qa(self, qa) -> list[str]:
        return self.run(qa.question, qa.references, top_k=max(self.config.ks)).ranking


# ------------------------------------------------------------ map export


def reference_geometry(sq: SpatialQuery):
    return to_candidate_query(sq).reference


def buffer_ring(sq: SpatialQuery, n: int = 64) -> Optional[list]:
    """Approximate outline of the search area as lon/lat rings (none for regions)."""
    if sq.kind is QueryKind.REGION_CONTAIN:
        return None
    eps = sq.eps_km
    if sq.kind is QueryKind.POINT_RADIUS:
        return [[list(c) for c in geo.circle(p.coord, eps, n).outer] for p in sq.references]
    a, b = (p.coord for p in sq.references)
    return [_capsule(a, b, eps, n)]


def _capsule(a, b, eps_km: float, n: int) -> list:
    """Stadium around segment a-b in a local flat frame, closed ring."""
    lat0 = math.radians((a.lat + b.lat) / 2)
    kx = geo.KM_PER_DEGREE * math.cos(lat0)
    ky = geo.KM_PER_DEGREE
    ax, ay = a.lon * kx, a.lat * ky
    bx, by = b.lon * kx, b.lat * ky
    ang = math.atan2(by - ay, bx - ax)
    half = max(n // 2, 4)
    ring = []
    for cx, cy, start in ((bx, by, ang - math.pi / 2), (ax, ay, ang + math.pi / 2)):
        for i in range(half + 1):
            t = start + math.pi * i / half
            ring.append([(cx + eps_km * math.cos(t)) / kx, (cy + eps_km * math.sin(t)) / ky])
    ring.append(ring[0])
    return ring


def to_feature_collection(result: QueryResult, corpus) -> dict:
    """GeoJSON with the reference geometry, the search outline and the ranked POIs."""
    sq = result.query
    feats = [{
        "type": "Feature",
        "geometry": geo.to_geojson(reference_geometry(sq)),
        "properties": {"role": "reference", "kind": sq.kind.value, "eps_km": sq.eps_km,
                       "region": sq.region_name},
    }]
    ring = buffer_ring(sq)
    if ring is not None:
        geom = {"type": "Polygon", "coordinates": [ring[0]]} if len(ring) == 1 else {
            "type": "MultiPolygon", "coordinates": [[r] for r in ring]}
        feats.append({"type": "Feature", "geometry": geom, "properties": {"role": "buffer", "eps_km": sq.eps_km}})
    by_id = {c.poi_id: c for c in result.candidates}
    for rank, pid in enumerate(result.ranking, 1):
        r, c = corpus.record(pid), by_id[pid]
        feats.append({
            "type": "Feature",
            "geometry": geo.to_geojson(r.geometry),
            "properties": {"role": "answer", "rank": rank, "id": pid, "name": r.name, "category": r.category,
                           "distance_km": c.distance_km, "f_spatial": c.f_spatial, "f_semantic": c.f_semantic,
                           "score": c.score},
        })
    return {"type": "FeatureCollection", "features": feats}
