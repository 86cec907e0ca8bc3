import json

import pytest

from georank import corpus as store
from georank.cli import main
from georank.embedding import HashEmbedder
from georank.engine import Engine, EngineConfig, to_feature_collection
from georank.evaluation import run_baseline

import oracles

ROUTE = ((-73.99, 40.745), (-73.97, 40.755))
ROUTE_DSL = f"route({ROUTE[0][0]},{ROUTE[0][1]} ; {ROUTE[1][0]},{ROUTE[1][1]}) buffer 1000m category restaurant"


@pytest.fixture(scope="module")
def files(small_city, tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    paths = small_city.write(root / "city")
    assert main(["ingest", str(paths["pois"]), str(paths["gazetteer"]), "--store", str(root / "store")]) == 0
    return {"store": str(root / "store"), "qa": str(paths["qa"]), "root": root, **{k: str(v) for k, v in paths.items()}}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def first_qa(small_city):
    qa = small_city.qa[0]
    refs = [a for r in qa["references"] for a in ("--ref", r)]
    return qa["question"].split(), refs


# exit codes


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["query"],
        ["query", "pizza", "--topk", "many"],
        ["frobnicate"],
    ],
)
def test_argparse_errors_exit_2(argv, capsys):
    assert run(capsys, *argv)[0] == 2


def test_missing_store_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "query", "pizza", "--store", str(tmp_path / "none"))
    assert code == 2 and "manifest" in err


def test_missing_input_file_exits_2(tmp_path, capsys):
    assert run(capsys, "ingest", str(tmp_path / "nope.geojson"), "--store", str(tmp_path / "s"))[0] == 2


def test_bad_dsl_exits_2_with_position(files, capsys):
    code, _, err = run(capsys, "query", "--dsl", "point(1, 2) radius 5 parsecs", "--store", files["store"])
    assert code == 2 and "column" in err


def test_unknown_baseline_exits_2(files, capsys):
    assert run(capsys, "eval", "--qa", files["qa"], "--baselines", "SD,XX", "--store", files["store"])[0] == 2


def test_invalid_weights_exit_2(files, capsys):
    assert run(capsys, "query", "pizza", "--ref", "-73.98,40.75", "--lambda-fixed", "0.7,0.7", "--store", files["store"])[0] == 2


def test_llm_parser_without_gateway_exits_2(files, capsys):
    assert run(capsys, "query", "pizza", "--ref", "-73.98,40.75", "--parser", "llm", "--store", files["store"])[0] == 2


def test_unreachable_embedding_service_exits_3(files, tmp_path, capsys):
    cfg = tmp_path / "svc.conf"
    cfg.write_text("embedder = service\nembedding_url = http://127.0.0.1:9/v1  # nothing listens here\n")
    code, _, err = run(capsys, "ingest", files["pois"], "--store", str(tmp_path / "s"), "--config", str(cfg))
    assert code == 3 and "service" in err


# commands


def test_index_report(files, capsys):
    code, out, _ = run(capsys, "index", "--store", files["store"])
    assert code == 0 and out.startswith("records 400")
    assert "leaf capacity 16" in out


def test_query_is_deterministic(files, small_city, capsys):
    words, refs = first_qa(small_city)
    outs = [run(capsys, "query", *words, *refs, "--format", "json", "--store", files["store"]) for _ in range(2)]
    assert outs[0][0] == 0 and outs[0][1] == outs[1][1]
    assert json.loads(outs[0][1])["answers"]


def test_spatial_only_weights_reproduce_distance_baseline(files, small_city, small_corpus, capsys):
    words, refs = first_qa(small_city)
    code, out, _ = run(capsys, "query", *words, *refs, "--lambda-p", "1", "--lambda-d", "0", "--lambda-fixed", "1,0",
                       "--topk", "1000", "--format", "json", "--store", files["store"])
    got = [a["id"] for a in json.loads(out)["answers"]]
    engine = Engine(small_corpus)
    sq = engine.parse(" ".join(words), small_city.qa[0]["references"])[0]
    assert code == 0 and got == run_baseline("SD", sq, small_corpus, HashEmbedder())


def test_route_buffer_answers_stay_inside(files, small_corpus, capsys):
    code, out, _ = run(capsys, "query", "--dsl", ROUTE_DSL, "--topk", "50", "--format", "json", "--store", files["store"])
    answers = json.loads(out)["answers"]
    assert code == 0 and answers
    for a in answers:
        g = small_corpus.record(a["id"]).geometry
        assert a["category"] == "restaurant"
        assert oracles.point_segment_search_km((g.lon, g.lat), *ROUTE) <= 1.0 + 1e-6


def test_explain_stages(files, small_city, capsys):
    words, refs = first_qa(small_city)
    code, out, _ = run(capsys, "explain", *words, *refs, "--store", files["store"])
    stages = [line.split("]")[0] + "]" for line in out.splitlines() if line.startswith("[")]
    assert code == 0 and stages == ["[parse]", "[retrieve]", "[scores]", "[frontier]", "[weights]", "[select]"]
    assert "mode=rule" in out


def test_explain_dsl_bypasses_parsing(files, capsys):
    out = run(capsys, "explain", "--dsl", ROUTE_DSL, "--store", files["store"])[1]
    assert out.startswith("[parse] bypassed (dsl expression)")


def test_geojson_roles(files, capsys):
    code, out, _ = run(capsys, "query", "--dsl", ROUTE_DSL, "--format", "geojson", "--store", files["store"])
    fc = json.loads(out)
    roles = [f["properties"]["role"] for f in fc["features"]]
    assert code == 0 and fc["type"] == "FeatureCollection"
    assert roles[:2] == ["reference", "buffer"] and set(roles[2:]) == {"answer"}
    ranks = [f["properties"]["rank"] for f in fc["features"][2:]]
    assert ranks == list(range(1, len(ranks) + 1))


def test_config_file_and_flag_override(files, tmp_path, capsys):
    cfg = tmp_path / "g.conf"
    cfg.write_text("# defaults for this test\ntopk = 2\n")
    base = ["query", "--dsl", ROUTE_DSL, "--format", "json", "--store", files["store"], "--config", str(cfg)]
    assert len(json.loads(run(capsys, *base)[1])["answers"]) == 2
    assert len(json.loads(run(capsys, *base, "--topk", "4")[1])["answers"]) == 4
    cfg.write_text("top_k_wrong = 2\n")
    assert run(capsys, *base)[0] == 2


def test_eval_writes_reports(files, tmp_path, capsys):
    out, csv = tmp_path / "r.json", tmp_path / "r.csv"
    code, table, _ = run(capsys, "eval", "--qa", files["qa"], "--baselines", "SD,TE", "--k", "1,5",
                         "--out", str(out), "--csv", str(csv), "--store", files["store"])
    reports = json.loads(out.read_text())
    assert code == 0 and [r["name"] for r in reports] == ["georank", "SD", "TE"]
    assert csv.read_text().splitlines()[0] == "name,metric,@1,@5"
    assert "georank" in table


def test_synth_then_ingest_matches_library(tmp_path, capsys):
    assert run(capsys, "synth", str(tmp_path / "c"), "--pois-count", "80", "--qa-count", "5", "--seed", "3")[0] == 0
    assert run(capsys, "ingest", str(tmp_path / "c" / "pois.geojson"), str(tmp_path / "c" / "gazetteer.geojson"),
               "--store", str(tmp_path / "s"))[0] == 0
    from georank.synthetic import build_corpus, generate_city

    assert store.load(tmp_path / "s") == build_corpus(generate_city(80, 5, seed=3))


def test_offline_gateway_llm_parser(files, small_city, capsys):
    words, refs = first_qa(small_city)
    code, out, _ = run(capsys, "query", *words, *refs, "--parser", "llm", "--weights", "llm",
                       "--gateway-url", "offline", "--format", "json", "--store", files["store"])
    payload = json.loads(out)
    assert code == 0 and payload["query"]["parse_mode"] == "llm" and payload["reranked_by_llm"]


# engine


def test_engine_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(parser="llm")
    with pytest.raises(ValueError):
        EngineConfig(lambda_p=0, lambda_d=0)
    with pytest.raises(ValueError):
        EngineConfig(embedder="service")
    assert EngineConfig().updated(topk=3).topk == 3


def test_engine_result_consistency(small_corpus, small_pairs):
    engine = Engine(small_corpus)
    for qa in small_pairs[:8]:
        res = engine.run(qa.question, qa.references, top_k=10)
        by_id = {c.poi_id: c for c in res.candidates}
        assert set(res.frontier) == {c.poi_id for c in res.candidates if c.on_frontier}
        assert res.ranking[: len(res.frontier)] and res.ranking[0] in res.frontier
        w = res.weights
        for c in res.candidates:
            assert c.score == pytest.approx(w.lambda_s * c.f_spatial + w.lambda_k * c.f_semantic, abs=1e-12)
        assert len(res.ranking) == len(set(res.ranking)) <= 10
        assert all(pid in by_id for pid in res.ranking)
        fc = to_feature_collection(res, small_corpus)
        assert [f["properties"]["id"] for f in fc["features"] if f["properties"]["role"] == "answer"] == res.ranking
