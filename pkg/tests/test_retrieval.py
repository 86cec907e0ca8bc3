import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from georank import geometry as geo
from georank.corpus import Gazetteer, GazetteerEntry, build_corpus
from georank.embedding import HashEmbedder, LexiconMasker, cosine
from georank.geometry import Point
from georank.query import QueryIntent, SpatialQuery
from georank.retrieval import fuse_spatial, retrieve_sparse, score_dense_spatial, score_semantic, sparse_score

import oracles

EMB, MASK = HashEmbedder(), LexiconMasker()
CENTER = geo.Coord(-73.98, 40.75)
REGION = geo.circle(CENTER, 1.5, 32)


def feature(pid, name, cat, coord, reviews):
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": list(coord)},
        "properties": {"id": pid, "name": name, "category": cat, "reviews": reviews},
    }


def tiny_corpus():
    rows = [
        ("a", "Noodle Bar", "restaurant", (0.2, 0.1), ["Spicy noodles and dumplings.", "It is near the park."]),
        ("b", "Quiet Inn", "hotel", (0.5, 0.0), ["Clean rooms.", "Close to the station."]),
        ("c", "Taco Stand", "restaurant", (0.0, 0.9), ["Crunchy tacos with salsa."]),
        ("d", "Sushi Place", "restaurant", (-1.7, 0.0), ["Fresh fish and rice."]),
        ("e", "Far Grill", "restaurant", (3.0, 3.0), ["Steak and fries."]),
        ("f", "Corner Diner", "restaurant", (0.0, -0.45), ["Pancakes all day.", "Walk two blocks from the subway exit."]),
    ]
    feats = [feature(p, n, c, geo.offset(CENTER, *off), r) for p, n, c, off, r in rows]
    gaz = Gazetteer([GazetteerEntry("middle", (), REGION)])
    return build_corpus({"type": "FeatureCollection", "features": feats}, gaz, EMB, MASK)


CORPUS = tiny_corpus()


def test_sparse_score_examples():
    assert sparse_score(0.0, True) == 1.0
    assert sparse_score(1.0, False) == 0.5
    assert sparse_score(2.0, False, scale_km=2.0) == 0.5


def test_region_candidates_score_one():
    sq = SpatialQuery("region", (REGION,), None, None)
    got = retrieve_sparse(sq, CORPUS.index)
    assert {c.poi_id for c in got} == {"a", "b", "c", "f"}
    assert all(c.f_sparse == 1.0 and c.intersects for c in got)


def test_point_radius_law_and_order():
    ref = Point(*CENTER)
    sq = SpatialQuery("point", (ref,), None, 1.0)
    got = retrieve_sparse(sq, CORPUS.index)
    # brute-force oracle over the whole corpus
    dist = {r.id: float(oracles.chord_km(CENTER.lon, CENTER.lat, r.geometry.lon, r.geometry.lat)) for r in CORPUS}
    assert [c.poi_id for c in got] == sorted((k for k, d in dist.items() if d <= 1.0), key=lambda k: (dist[k], k))
    for c in got:
        assert c.distance_km == pytest.approx(dist[c.poi_id], abs=1e-9)
        assert abs(c.f_sparse - 1 / (1 + c.distance_km)) < 1e-12


def test_category_filter_in_retrieval():
    sq = SpatialQuery("point", (Point(*CENTER),), "hotel", 1.0)
    assert [c.poi_id for c in retrieve_sparse(sq, CORPUS.index)] == ["b"]


def test_dense_cosine_examples():
    v = EMB.embed("near the park")
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine(v, np.zeros_like(v)) == 0.0
    u, w = EMB.embed("near park"), EMB.embed("near station")
    assert cosine(u, w) == pytest.approx(oracles.cos(oracles.hash_embed("near park"), oracles.hash_embed("near station")), abs=1e-12)


def test_orthogonal_vocabularies():
    u, w = np.zeros(8), np.zeros(8)
    u[0], w[1] = 1, 1
    assert cosine(u, w) == 0.0


@given(st.text(max_size=60))
def test_hash_embedder_matches_oracle(text):
    assert np.allclose(EMB.embed(text), oracles.hash_embed(text), atol=1e-12)


def test_dense_spatial_matches_standalone():
    q = "I am near the park. I want noodles."
    sq = SpatialQuery("point", (Point(*CENTER),), None, 2.0)
    cands = score_dense_spatial(q, retrieve_sparse(sq, CORPUS.index), CORPUS, EMB, MASK)
    vq = oracles.hash_embed("I am near the park.")
    for c in cands:
        r = CORPUS.record(c.poi_id)
        assert c.f_dense_spatial == pytest.approx(oracles.cos(vq, oracles.hash_embed(r.spatial_summary)), abs=1e-6)


def test_semantic_scores_and_ranking_match_standalone():
    q = "Somewhere near the park. Spicy noodles and dumplings please."
    sq = SpatialQuery("point", (Point(*CENTER),), None, 2.0)
    intent = QueryIntent("Somewhere near the park.", "Spicy noodles and dumplings please.", "restaurant")
    cands = score_semantic(q, retrieve_sparse(sq, CORPUS.index), CORPUS, EMB, MASK, intent)
    assert "b" not in {c.poi_id for c in cands}  # hotel excluded for a food question
    vq = oracles.hash_embed("Spicy noodles and dumplings please.")
    want = {c.poi_id: oracles.cos(vq, oracles.hash_embed(CORPUS.record(c.poi_id).semantic_summary)) for c in cands}
    for c in cands:
        assert c.f_semantic == pytest.approx(want[c.poi_id], abs=1e-6)
    ranked = sorted(cands, key=lambda c: (-c.f_semantic, c.poi_id))
    assert [c.poi_id for c in ranked] == sorted(want, key=lambda k: (-want[k], k))
    assert ranked[0].poi_id == "a"


def test_identical_semantic_views_score_one():
    r = CORPUS.record("c")
    sq = SpatialQuery("point", (Point(*CENTER),), None, 2.0)
    cands = [c for c in retrieve_sparse(sq, CORPUS.index) if c.poi_id == "c"]
    assert score_semantic(r.semantic_summary, cands, CORPUS, EMB, MASK)[0].f_semantic == pytest.approx(1.0, abs=1e-6)


def test_fuse_examples():
    assert fuse_spatial(0.8, 0.4, 0.5, 0.5) == pytest.approx(0.6)
    assert fuse_spatial(0.8, 0.4, 1.0, 0.0) == 0.8
    assert fuse_spatial(0.8, 0.4, 0.0, 1.0) == 0.4
    assert np.allclose(fuse_spatial(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.25, 0.75), [0.25, 0.75])


@pytest.mark.parametrize("lp,ld", [(-0.1, 1), (0, 0)])
def test_fuse_rejects_bad_weights(lp, ld):
    with pytest.raises(ValueError):
        fuse_spatial(0.5, 0.5, lp, ld)


def test_masker_views_partition_sentences():
    text = "Great food. It is near the river. Friendly staff."
    assert MASK.spatial_view(text) == "It is near the river."
    assert MASK.semantic_view(text) == "Great food. Friendly staff."
