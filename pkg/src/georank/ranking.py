"""Pareto frontier over (spatial, semantic) scores and trade-off selection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from . import lexicon
from .query import QueryIntent

log = logging.getLogger(__name__)


class NoAnswer(LookupError):
    """The candidate pool is empty."""


@dataclass(frozen=True)
class ParetoPoint:
    poi_id: str
    f_s: float
    f_k: float

    def __post_init__(self):
        if not (math.isfinite(self.f_s) and math.isfinite(self.f_k)):
            raise ValueError(f"non-finite objectives for {self.poi_id!r}")


@dataclass(frozen=True)
class TradeoffWeights:
    lambda_s: float
    lambda_k: float

    def __post_init__(self):
        if self.lambda_s < 0 or self.lambda_k < 0:
            raise ValueError("trade-off weights must be non-negative")
        if abs(self.lambda_s + self.lambda_k - 1.0) > 1e-9:
            raise ValueError(f"trade-off weights must sum to 1, got {self.lambda_s} + {self.lambda_k}")

    def score(self, f_s: float, f_k: float) -> float:
        return self.lambda_s * f_s + self.lambda_k * f_k


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.f_s >= b.f_s and a.f_k >= b.f_k and (a.f_s > b.f_s or a.f_k > b.f_k)


def pareto_frontier(
    candidates: Sequence[ParetoPoint], weights: Optional[TradeoffWeights] = None
) -> list[ParetoPoint]:
    """Non-dominated points, sorted by f_s desc, f_k desc, id.

    Points with identical objective pairs are all kept.  When ``weights`` is
    given, an objective whose weight is zero is ignored for dominance, so the
    frontier degenerates to the maximisers of the remaining objective.
    """
    use_s = weights is None or weights.lambda_s > 0
    use_k = weights is None or weights.lambda_k > 0

    def key(p):
        return (p.f_s if use_s else 0.0, p.f_k if use_k else 0.0)

    ordered = sorted(candidates, key=lambda p: (-key(p)[0], -key(p)[1], p.poi_id))
    out: list[ParetoPoint] = []
    best_k_above = -math.inf  # best f_k among strictly larger f_s
    i = 0
    while i < len(ordered):
        s = key(ordered[i])[0]
        j = i
        while j < len(ordered) and key(ordered[j])[0] == s:
            j += 1
        top_k = key(ordered[i])[1]
        if top_k > best_k_above:
            out.extend(p for p in ordered[i:j] if key(p)[1] == top_k)
            best_k_above = top_k
        i = j
    out.sort(key=lambda p: (-p.f_s, -p.f_k, p.poi_id))
    return out


def heuristic_weights(intent: QueryIntent) -> TradeoffWeights:
    """lambda_s = (1 + s) / (2 + s + k), s and k the spatial / semantic cue counts."""
    s = lexicon.spatial_cue_count(intent.spatial_requirement)
    k = lexicon.semantic_cue_count(intent.semantic_requirement)
    lam = (1 + s) / (2 + s + k)
    return TradeoffWeights(lam, 1.0 - lam)


def select(
    frontier: Sequence[ParetoPoint],
    f_s: Mapping[str, float],
    f_k: Mapping[str, float],
    weights: TradeoffWeights,
    top_k: Optional[int] = None,
) -> list[str]:
    """Frontier members by weighted score, then the rest of the pool by the same score.

    The pool is every id in ``f_s``; ties break on ascending id.  ``top_k=None``
    returns the full ranking.
    """
    if not f_s:
        raise NoAnswer("empty candidate pool")
    if top_k is not None and top_k < 1:
        raise ValueError("top_k must be at least 1")

    def order(ids):
        return sorted(ids, key=lambda i: (-weights.score(f_s[i], f_k[i]), i))

    front_ids = {p.poi_id for p in frontier}
    ranked = order(front_ids) + order(i for i in f_s if i not in front_ids)
    return ranked if top_k is None else ranked[:top_k]


def validate_permutation(perm, n: int) -> Optional[list[int]]:
    if not isinstance(perm, list) or len(perm) != n:
        return None
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in perm):
        return None
    if sorted(perm) != list(range(n)):
        return None
    return perm


def llm_rerank(
    candidates: Sequence[dict],
    intent: QueryIntent,
    gateway,
    fallback: Callable[[], list[str]],
) -> tuple[list[str], bool]:
    """Order ``candidates`` with the rerank prompt.

    Each candidate is a dict with at least ``poi_id``; the remaining keys are
    sent as the place payload.  Returns ``(ranking, used_llm)``; any transport
    or validation failure yields ``fallback()`` instead.
    """
    from .llm import GatewayError

    places = [{k: v for k, v in c.items() if k != "poi_id"} for c in candidates]
    bindings = {
        "query_constraints": {
            "spatial_constraints": intent.spatial_requirement,
            "user_constraints": intent.semantic_requirement,
        },
        "places": places,
    }
    try:
        perm = gateway.complete("rerank", bindings).parsed
    except GatewayError as exc:
        log.warning("rerank gateway failed (%s); falling back to weighted selection", exc)
        return fallback(), False
    perm = validate_permutation(perm, len(candidates))
    if perm is None:
        log.warning("rerank returned an invalid permutation; falling back to weighted selection")
        return fallback(), False
    return [candidates[i]["poi_id"] for i in perm], True
