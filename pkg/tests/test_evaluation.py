import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from georank import geometry as geo
from georank.corpus import QaPair
from georank.embedding import HashEmbedder
from georank.engine import Engine, reference_geometry
from georank.evaluation import (
    DEFAULT_KS,
    evaluate,
    f1_at_k,
    format_table,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
    run_baseline,
)
from georank.retrieval import retrieve_sparse

import oracles


def test_ndcg_pattern_101():
    ranked, rel = ["a", "b", "c"], {"a", "c"}
    assert ndcg_at_k(ranked, rel, 3) == pytest.approx(oracles.metrics(ranked, rel, 3)[3], abs=1e-12)
    assert ndcg_at_k(ranked, rel, 3) == pytest.approx(0.9197, abs=1e-4)


def test_metric_examples():
    assert precision_at_k(["a", "b"], {"a"}, 1) == 1.0
    assert precision_at_k(["a", "b"], {"b"}, 2) == 0.5
    # short list: denominator is the number returned
    assert precision_at_k(["a"], {"a"}, 10) == 1.0
    assert precision_at_k([], {"a"}, 3) == 0.0
    assert recall_at_k(["a", "x", "b"], {"a", "b", "c"}, 3) == pytest.approx(2 / 3)
    assert f1_at_k(["x"], {"a"}, 1) == 0.0
    assert ndcg_at_k(["x", "a"], {"a"}, 2) == pytest.approx(1 / math.log2(3))


@pytest.mark.parametrize("fn", [precision_at_k, recall_at_k, ndcg_at_k])
def test_metric_errors(fn):
    with pytest.raises(ValueError):
        fn(["a"], {"a"}, 0)
    with pytest.raises(ValueError):
        fn(["a"], set(), 1)


def test_random_cases_match_longhand():
    rng = random.Random(0)
    for _ in range(50):
        pool = [f"i{j}" for j in range(20)]
        ranked = rng.sample(pool, rng.randint(0, 15))
        rel = set(rng.sample(pool, rng.randint(1, 5)))
        k = rng.choice([1, 3, 5, 10])
        want = oracles.metrics(ranked, rel, k)
        got = (precision_at_k(ranked, rel, k), recall_at_k(ranked, rel, k), f1_at_k(ranked, rel, k), ndcg_at_k(ranked, rel, k))
        assert got == pytest.approx(want, abs=1e-12)


@given(st.lists(st.sampled_from("abcdefghij"), unique=True, max_size=10), st.sets(st.sampled_from("abcdefghij"), min_size=1))
def test_metric_properties(ranked, rel):
    assert precision_at_k(ranked, rel, 1) == ndcg_at_k(ranked, rel, 1)
    recalls = [recall_at_k(ranked, rel, k) for k in DEFAULT_KS]
    assert recalls == sorted(recalls)
    for k in DEFAULT_KS:
        assert 0 <= ndcg_at_k(ranked, rel, k) <= 1 + 1e-12


def test_evaluate_macro_average():
    pairs = [QaPair("q1", (), frozenset({"a"}), "1"), QaPair("q2", (), frozenset({"b"}), "2")]
    ranking = {"1": ["a", "b"], "2": ["a", "b"]}
    rep = evaluate(lambda qa: ranking[qa.qid], pairs, (1, 2), {"x": 1}, "demo")
    assert rep.precision[1] == 0.5 and rep.recall[2] == 1.0
    assert rep.ndcg[2] == pytest.approx((1 + 1 / math.log2(3)) / 2)
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and d["name"] == "demo" and d["fingerprint"] == rep.fingerprint
    assert rep.to_csv().splitlines()[0] == "name,metric,@1,@2"
    assert "demo" in format_table([rep])


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate(lambda qa: [], [], (1,))
    with pytest.raises(ValueError):
        evaluate(lambda qa: [], [QaPair("q", (), frozenset({"a"}))], (0,))


# baselines


def test_baselines_follow_their_definitions(small_corpus, small_pairs):
    emb = HashEmbedder()
    engine = Engine(small_corpus)
    for qa in small_pairs[:5]:
        sq = engine.query_for(qa)
        sd = run_baseline("SD", sq, small_corpus, emb)
        cands = retrieve_sparse(sq, small_corpus.index)
        assert sd == [c.poi_id for c in sorted(cands, key=lambda c: (c.distance_km, c.poi_id))]

        pool = [r for r in small_corpus if r.category == sq.target_category]
        vq = oracles.hash_embed(sq.raw_question)
        text = {r.id: oracles.cos(vq, oracles.hash_embed(r.description)) for r in pool}
        te = run_baseline("TE", sq, small_corpus, emb)
        assert te[:10] == sorted(text, key=lambda i: (-text[i], i))[:10]

        ref = reference_geometry(sq)
        st_score = {r.id: 0.5 * (1 / (1 + geo.distance(ref, r.geometry)) + text[r.id]) for r in pool}
        assert run_baseline("ST", sq, small_corpus, emb)[:10] == sorted(st_score, key=lambda i: (-st_score[i], i))[:10]


def test_unknown_baseline(small_corpus, small_pairs):
    sq = Engine(small_corpus).query_for(small_pairs[0])
    with pytest.raises(ValueError):
        run_baseline("XX", sq, small_corpus, HashEmbedder())
