"""Spatially constrained question answering over points of interest.

The pipeline turns a question into a structured spatial query, retrieves the
POIs that satisfy it, scores them for spatial and semantic relevance and
ranks them through the Pareto frontier of the two scores.
"""
from .corpus import Corpus, Gazetteer, PoiRecord, QaPair, ingest, load, load_qa
from .embedding import HashEmbedder, LexiconMasker
from .engine import Engine, EngineConfig, QueryResult
from .query import QueryIntent, QueryKind, SpatialQuery, parse_rule_based

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Engine", "EngineConfig", "Gazetteer", "HashEmbedder", "LexiconMasker", "PoiRecord", "QaPair",
    "QueryIntent", "QueryKind", "QueryResult", "SpatialQuery", "ingest", "load", "load_qa", "parse_rule_based",
]
