"""Spatial candidate retrieval and the three per-candidate relevance scores.

``f_sparse``        1 when the candidate touches the reference, else 1 / (1 + d / scale)
``f_dense_spatial`` cosine between spatial views of question and candidate
``f_semantic``      cosine between semantic views of question and candidate
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import geometry as geo
from .embedding import cosine
from .query import QueryIntent, SpatialQuery, to_candidate_query

DEFAULT_DISTANCE_SCALE_KM = 1.0


@dataclass(frozen=True)
class CandidateScores:
    poi_id: str
    distance_km: float
    f_sparse: float
    intersects: bool = False
    f_dense_spatial: Optional[float] = None
    f_semantic: Optional[float] = None


def sparse_score(distance_km: float, intersects: bool, scale_km: float = DEFAULT_DISTANCE_SCALE_KM) -> float:
    if intersects:
        return 1.0
    return 1.0 / (1.0 + distance_km / scale_km)


def retrieve_sparse(
    sq: SpatialQuery, index, corpus=None, distance_scale_km: float = DEFAULT_DISTANCE_SCALE_KM
) -> list[CandidateScores]:
    """The spatial candidate set with sparse scores, nearest first (ties by id)."""
    plan = to_candidate_query(sq)
    ref = plan.reference
    out = []
    for pid in plan.execute(index):
        g = index.geometries[pid]
        hit = geo.intersects(ref, g)
        d = 0.0 if hit else geo.distance(ref, g)
        out.append(CandidateScores(pid, d, sparse_score(d, hit, distance_scale_km), hit))
    out.sort(key=lambda c: (c.distance_km, c.poi_id))
    return out


def score_dense_spatial(question: str, candidates: Sequence[CandidateScores], corpus, embedder, masker) -> list[CandidateScores]:
    vq = embedder.embed(masker.spatial_view(question))
    return [replace(c, f_dense_spatial=cosine(vq, corpus.record(c.poi_id).spatial_vec)) for c in candidates]


def semantic_filter(candidates: Sequence[CandidateScores], corpus, intent: Optional[QueryIntent]) -> list[CandidateScores]:
    """Drop candidates whose category does not match the intent's target type."""
    if intent is None:
        return list(candidates)
    return [c for c in candidates if corpus.record(c.poi_id).category == intent.target_category]


def score_semantic(
    question: str, candidates: Sequence[CandidateScores], corpus, embedder, masker, intent: Optional[QueryIntent] = None
) -> list[CandidateScores]:
    vq = embedder.embed(masker.semantic_view(question))
    return [
        replace(c, f_semantic=cosine(vq, corpus.record(c.poi_id).semantic_vec))
        for c in semantic_filter(candidates, corpus, intent)
    ]


def fuse_spatial(f_sparse, f_dense, lambda_p: float = 0.5, lambda_d: float = 0.5):
    """Weighted hybrid spatial score; works elementwise on arrays too."""
    if lambda_p < 0 or lambda_d < 0:
        raise ValueError("fusion weights must be non-negative")
    if lambda_p == 0 and lambda_d == 0:
        raise ValueError("at least one fusion weight must be positive")
    return lambda_p * f_sparse + lambda_d * f_dense
