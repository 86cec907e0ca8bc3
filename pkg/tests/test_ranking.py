import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from georank.llm import ChatGateway, StubTransport
from georank.query import QueryIntent
from georank.ranking import (
    NoAnswer,
    ParetoPoint,
    TradeoffWeights,
    heuristic_weights,
    llm_rerank,
    pareto_frontier,
    select,
    validate_permutation,
)

import oracles

FOUR = [ParetoPoint("a", 0.9, 0.2), ParetoPoint("b", 0.5, 0.5), ParetoPoint("c", 0.2, 0.9), ParetoPoint("d", 0.4, 0.4)]


def ids(points):
    return {p.poi_id for p in points}


def test_frontier_example():
    assert ids(pareto_frontier(FOUR)) == {"a", "b", "c"}


def test_frontier_single():
    assert pareto_frontier([FOUR[3]]) == [FOUR[3]]


def test_frontier_keeps_exact_ties():
    pts = [ParetoPoint("x", 0.5, 0.5), ParetoPoint("y", 0.5, 0.5), ParetoPoint("z", 0.4, 0.4)]
    assert ids(pareto_frontier(pts)) == {"x", "y"}


def test_frontier_rejects_non_finite():
    with pytest.raises(ValueError):
        ParetoPoint("n", float("nan"), 0.0)


def random_instance(rng, n, grid=None):
    vals = rng.random((n, 2)) if grid is None else rng.integers(0, grid, (n, 2)) / grid
    return [ParetoPoint(f"p{i:03d}", float(s), float(k)) for i, (s, k) in enumerate(vals)], vals


@pytest.mark.parametrize("seed", range(10))
def test_frontier_200_points_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    pts, vals = random_instance(rng, 200, grid=None if seed % 2 else 12)
    mask = oracles.dominance_frontier(vals)
    assert ids(pareto_frontier(pts)) == {p.poi_id for p, m in zip(pts, mask) if m}


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=40))
def test_frontier_property(pairs):
    pts = [ParetoPoint(f"p{i:02d}", s / 6, k / 6) for i, (s, k) in enumerate(pairs)]
    front = pareto_frontier(pts)
    mask = oracles.dominance_frontier(np.array([[p.f_s, p.f_k] for p in pts]))
    assert ids(front) == {p.poi_id for p, m in zip(pts, mask) if m}
    assert pareto_frontier(front) == front
    # scale invariance: a positive affine map of one objective keeps the frontier
    scaled = [ParetoPoint(p.poi_id, 3 * p.f_s + 1, p.f_k) for p in pts]
    assert ids(pareto_frontier(scaled)) == ids(front)


def test_zero_weight_objective_ignored():
    w = TradeoffWeights(1.0, 0.0)
    assert ids(pareto_frontier(FOUR, w)) == {"a"}
    assert ids(pareto_frontier(FOUR, TradeoffWeights(0.0, 1.0))) == {"c"}


# weights


def test_weights_validation():
    with pytest.raises(ValueError):
        TradeoffWeights(0.7, 0.7)
    with pytest.raises(ValueError):
        TradeoffWeights(1.5, -0.5)


def test_heuristic_symmetric_when_no_cues():
    w = heuristic_weights(QueryIntent("", "", "restaurant"))
    assert (w.lambda_s, w.lambda_k) == (0.5, 0.5)


def test_heuristic_two_spatial_cues():
    # s = 2 (near, walking), k = 0
    w = heuristic_weights(QueryIntent("near the park, walking", "", "restaurant"))
    assert (w.lambda_s, w.lambda_k) == (0.75, 0.25)


@pytest.mark.parametrize(
    "spatial",
    ["I am staying near the station and want to walk around.", "Somewhere close, within a few blocks."],
)
def test_heuristic_spatial_heavy(spatial):
    w = heuristic_weights(QueryIntent(spatial, "", "restaurant"))
    assert w.lambda_s > w.lambda_k


def test_heuristic_semantic_heavy():
    w = heuristic_weights(QueryIntent("near here", "spicy vegan dumplings with quiet seating", "restaurant"))
    assert w.lambda_k > w.lambda_s


# select


def maps(points):
    return {p.poi_id: p.f_s for p in points}, {p.poi_id: p.f_k for p in points}


def test_select_example():
    front = FOUR[:3]
    w = TradeoffWeights(0.7, 0.3)
    assert [round(w.score(p.f_s, p.f_k), 2) for p in front] == [0.69, 0.50, 0.41]
    fs, fk = maps(front)
    assert select(front, fs, fk, w, 1) == ["a"]
    assert select(front, fs, fk, TradeoffWeights(0, 1), 1) == ["c"]


def test_select_fills_from_outside_frontier():
    fs, fk = maps(FOUR)
    front = pareto_frontier(FOUR)
    assert select(front, fs, fk, TradeoffWeights(0.5, 0.5), 4) == ["a", "c", "b", "d"]


def test_select_ties_by_id():
    pts = [ParetoPoint("b", 0.5, 0.5), ParetoPoint("a", 0.5, 0.5)]
    fs, fk = maps(pts)
    assert select(pareto_frontier(pts), fs, fk, TradeoffWeights(0.5, 0.5)) == ["a", "b"]


def test_select_errors():
    with pytest.raises(NoAnswer):
        select([], {}, {}, TradeoffWeights(0.5, 0.5))
    fs, fk = maps(FOUR)
    with pytest.raises(ValueError):
        select(FOUR, fs, fk, TradeoffWeights(0.5, 0.5), 0)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=30), st.floats(0.01, 0.99))
def test_select_top1_on_frontier(pairs, lam):
    pts = [ParetoPoint(f"p{i:02d}", s, k) for i, (s, k) in enumerate(pairs)]
    fs, fk = maps(pts)
    w = TradeoffWeights(lam, 1 - lam)
    front = pareto_frontier(pts)
    assert select(front, fs, fk, w, 1)[0] in ids(front)


# llm rerank


INTENT = QueryIntent("near the park", "spicy noodles", "restaurant")
CANDS = [{"poi_id": f"id{i}", "name": f"Place {i}"} for i in range(4)]


def rerank_with(reply):
    gw = ChatGateway(StubTransport(reply))
    return llm_rerank(CANDS, INTENT, gw, fallback=lambda: ["fallback"])


def test_rerank_identity():
    assert rerank_with("[0, 1, 2, 3]") == (["id0", "id1", "id2", "id3"], True)


def test_rerank_reversed():
    assert rerank_with("```json\n[3, 2, 1, 0]\n```") == (["id3", "id2", "id1", "id0"], True)


@pytest.mark.parametrize("reply", ["[0, 1]", "[0, 0, 1, 2]", "[0, 1, 2, 9]", "no idea"])
def test_rerank_invalid_falls_back(reply):
    assert rerank_with(reply) == (["fallback"], False)


def test_validate_permutation():
    assert validate_permutation([1, 0], 2) == [1, 0]
    assert validate_permutation([True, False], 2) is None
    assert validate_permutation("01", 2) is None
