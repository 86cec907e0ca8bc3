"""Ranking metrics, reference baselines and the evaluation loop.

Relevance is binary.  Precision divides by ``min(k, len(ranked))`` so a short
answer list is not penalised twice; an empty list scores 0.  Scores are
macro-averaged over queries.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from . import geometry as geo
from .embedding import cosine
from .query import SpatialQuery, to_candidate_query
from .retrieval import retrieve_sparse

REPORT_SCHEMA_VERSION = 1
DEFAULT_KS = (1, 3, 5, 10)
BASELINES = ("SD", "TE", "ST")


def _check(k: int, relevant) -> None:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not relevant:
        raise ValueError("relevant set is empty")


def _hits(ranked: Sequence[str], relevant, k: int) -> int:
    return sum(1 for r in ranked[:k] if r in relevant)


def precision_at_k(ranked: Sequence[str], relevant, k: int) -> float:
    _check(k, relevant)
    n = min(k, len(ranked))
    return _hits(ranked, relevant, k) / n if n else 0.0


def recall_at_k(ranked: Sequence[str], relevant, k: int) -> float:
    _check(k, relevant)
    return _hits(ranked, relevant, k) / len(relevant)


def f1_at_k(ranked: Sequence[str], relevant, k: int) -> float:
    p, r = precision_at_k(ranked, relevant, k), recall_at_k(ranked, relevant, k)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def ndcg_at_k(ranked: Sequence[str], relevant, k: int) -> float:
    _check(k, relevant)
    dcg = sum(1.0 / math.log2(i + 2) for i, r in enumerate(ranked[:k]) if r in relevant)
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(relevant))))
    return dcg / idcg


METRICS: dict[str, Callable] = {
    "precision": precision_at_k,
    "recall": recall_at_k,
    "f1": f1_at_k,
    "ndcg": ndcg_at_k,
}


@dataclass
class MetricReport:
    ks: tuple[int, ...]
    precision: dict[int, float]
    recall: dict[int, float]
    f1: dict[int, float]
    ndcg: dict[int, float]
    per_query: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    name: str = ""

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def metric(self, name: str) -> dict[int, float]:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "name": self.name,
            "config": self.config,
            "fingerprint": self.fingerprint,
            "ks": list(self.ks),
            "metrics": {m: {str(k): self.metric(m)[k] for k in self.ks} for m in METRICS},
            "per_query": self.per_query,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "metric", *[f"@{k}" for k in self.ks]])
        for m in METRICS:
            w.writerow([self.name, m, *[f"{self.metric(m)[k]:.6f}" for k in self.ks]])
        return buf.getvalue()


def evaluate(
    ranker: Callable[[object], Sequence[str]],
    qa_pairs: Sequence,
    ks: Iterable[int] = DEFAULT_KS,
    config: Optional[dict] = None,
    name: str = "",
) -> MetricReport:
    """Macro-averaged metrics of ``ranker`` (QaPair -> ranked ids) over ``qa_pairs``."""
    ks = tuple(sorted(set(ks)))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be positive")
    if not qa_pairs:
        raise ValueError("no QA pairs to evaluate")
    totals = {m: {k: 0.0 for k in ks} for m in METRICS}
    per_query = []
    for i, qa in enumerate(qa_pairs):
        ranked = list(ranker(qa))
        row = {"qid": qa.qid or str(i), "ranked": ranked[: max(ks)], "relevant": sorted(qa.relevant_ids)}
        for m, fn in METRICS.items():
            vals = {k: fn(ranked, qa.relevant_ids, k) for k in ks}
            row[m] = {str(k): v for k, v in vals.items()}
            for k, v in vals.items():
                totals[m][k] += v
        per_query.append(row)
    n = len(qa_pairs)
    avg = {m: {k: totals[m][k] / n for k in ks} for m in METRICS}
    return MetricReport(ks, avg["precision"], avg["recall"], avg["f1"], avg["ndcg"], per_query, dict(config or {}), name)


# ------------------------------------------------------------ baselines


def _reference_geometry(sq: SpatialQuery):
    return to_candidate_query(sq).reference


def _target_distance_km(sq: SpatialQuery, g) -> float:
    ref = _reference_geometry(sq)
    return 0.0 if geo.intersects(ref, g) else geo.distance(ref, g)


def run_baseline(name: str, sq: SpatialQuery, corpus, embedder) -> list[str]:
    """Rank POIs for ``sq`` with one of the reference baselines.

    SD  candidates satisfying the spatial predicate, nearest first
    TE  every POI of the target category, by cosine of question vs description
    ST  every POI of the target category, by the mean of 1/(1+d) and that cosine
    Ties break on ascending id.
    """
    name = name.upper()
    if name == "SD":
        return [c.poi_id for c in retrieve_sparse(sq, corpus.index, corpus)]
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; choose from {', '.join(BASELINES)}")
    vq = embedder.embed(sq.raw_question)
    pool = [r for r in corpus.records if sq.target_category is None or r.category == sq.target_category]
    scored = []
    for r in pool:
        text_score = cosine(vq, corpus.description_vector(r.id, embedder))
        if name == "TE":
            score = text_score
        else:
            score = 0.5 * (1.0 / (1.0 + _target_distance_km(sq, r.geometry)) + text_score)
        scored.append((-score, r.id))
    scored.sort()
    return [pid for _, pid in scored]


def baseline_ranker(name: str, corpus, embedder, query_for: Callable[[object], SpatialQuery]):
    """Adapt :func:`run_baseline` to the QaPair -> ranked ids shape used by :func:`evaluate`."""
    def rank(qa):
        return run_baseline(name, query_for(qa), corpus, embedder)
    return rank


def format_table(reports: Sequence[MetricReport]) -> str:
    """Side-by-side text table, one row per report and metric."""
    if not reports:
        return ""
    ks = reports[0].ks
    head = ["ranker", "metric", *[f"@{k}" for k in ks]]
    rows = [[r.name, m, *[f"{r.metric(m)[k]:.4f}" for k in ks]] for r in reports for m in METRICS]
    widths = [max(len(str(x[i])) for x in [head, *rows]) for i in range(len(head))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *rows]]
    return "\n".join(lines) + "\n"

