"""Command line entry point: ``georank {ingest,index,query,explain,eval,synth}``.

Exit codes: 0 success (an empty answer list included), 2 bad usage or input,
3 an external service failed with no fallback left.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus as store
from .dsl import DslError
from .embedding import LexiconMasker, TransportError
from .engine import Engine, EngineConfig, QueryResult, make_embedder, to_feature_collection
from .evaluation import BASELINES, baseline_ranker, evaluate, format_table
from .llm import TransportFailure
from .query import NotFound, UnresolvedReference

EXIT_OK, EXIT_USAGE, EXIT_SERVICE = 0, 2, 3
TRACE_ROWS = 25  # score rows shown by explain, best first

log = logging.getLogger("georank")


class UsageError(Exception):
    pass


# ------------------------------------------------------------ config


def _floats(text: str, n: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


_CONVERT = {
    "lambda_p": float, "lambda_d": float, "distance_scale_km": float,
    "embedding_dim": int, "topk": int, "seed": int,
    "ks": _ints, "lambda_fixed": lambda t: _floats(t, 2),
}


def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use EngineConfig field names."""
    known = set(EngineConfig.__dataclass_fields__)
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _CONVERT.get(key, str)(value)
    return out


def _weights_flag(value: str) -> dict:
    if value in ("heuristic", "llm"):
        return {"weights": value}
    if value.startswith("fixed"):
        _, _, rest = value.partition(":")
        return {"weights": "fixed", **({"lambda_fixed": _floats(rest, 2)} if rest else {})}
    raise UsageError(f"--weights must be heuristic, llm or fixed:s,k (got {value!r})")


def build_config(args) -> EngineConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    flag_map = {
        "store": "store", "parser": "parser", "embedder": "embedder", "lambda_p": "lambda_p",
        "lambda_d": "lambda_d", "topk": "topk", "gateway_url": "gateway_url", "seed": "seed",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = v
    if getattr(args, "k", None):
        values["ks"] = _ints(args.k)
    if getattr(args, "weights", None):
        values.update(_weights_flag(args.weights))
    if getattr(args, "lambda_fixed", None):
        values["lambda_fixed"] = _floats(args.lambda_fixed, 2)
        if not getattr(args, "weights", None):
            values["weights"] = "fixed"
    try:
        return EngineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _engine(args) -> Engine:
    cfg = build_config(args)
    if not cfg.store:
        raise UsageError("--store is required")
    return Engine(store.load(cfg.store), cfg)


# ------------------------------------------------------------ output


def _fmt(x: Optional[float]) -> str:
    return "-" if x is None else f"{x:.4f}"


def _answers(result: QueryResult, corpus) -> list[dict]:
    by_id = {c.poi_id: c for c in result.candidates}
    out = []
    for rank, pid in enumerate(result.ranking, 1):
        r, c = corpus.record(pid), by_id[pid]
        out.append({"rank": rank, "id": pid, "name": r.name, "category": r.category,
                    "distance_km": c.distance_km, "f_spatial": c.f_spatial, "f_semantic": c.f_semantic,
                    "score": c.score})
    return out


def _table(rows: list[dict], cols: Sequence[str]) -> str:
    cells = [[str(c) for c in cols]] + [
        [_fmt(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells) + "\n"


def _query_summary(result: QueryResult) -> dict:
    sq = result.query
    return {"kind": sq.kind.value, "eps_km": sq.eps_km, "category": sq.target_category,
            "region": sq.region_name, "parse_mode": result.parse_mode}


def render_query(result: QueryResult, corpus, fmt: str) -> str:
    if fmt == "geojson":
        return json.dumps(to_feature_collection(result, corpus), sort_keys=True, indent=2) + "\n"
    answers = _answers(result, corpus)
    if fmt == "json":
        payload = {"query": _query_summary(result), "answers": answers, "message": result.message,
                   "reranked_by_llm": result.reranked_by_llm}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if not answers:
        return f"no answers: {result.message}\n"
    return _table(answers, ["rank", "id", "name", "category", "distance_km", "f_spatial", "f_semantic", "score"])


def render_trace(result: QueryResult, corpus) -> str:
    sq, lines = result.query, []
    if result.parse_mode == "dsl":
        lines.append("[parse] bypassed (dsl expression)")
    else:
        lines.append(f"[parse] mode={result.parse_mode}")
    lines.append(f"  kind={sq.kind.value} eps_km={sq.eps_km} category={sq.target_category}"
                 + (f" region={sq.region_name}" if sq.region_name else ""))
    if result.intent is not None and result.parse_mode != "dsl":
        lines.append(f"  spatial requirement: {result.intent.spatial_requirement!r}")
        lines.append(f"  semantic requirement: {result.intent.semantic_requirement!r}")
    lines.append(f"[retrieve] candidates={result.candidate_count}")
    if result.stage_reached == "retrieval":
        lines.append(f"  stopped: {result.message}")
        return "\n".join(lines) + "\n"
    if result.stage_reached == "semantic":
        lines.append(f"[semantic] stopped: {result.message}")
        return "\n".join(lines) + "\n"
    lines.append("[scores]")
    rows = [{"id": c.poi_id, "distance_km": c.distance_km, "f_sparse": c.f_sparse, "f_dense": c.f_dense_spatial,
             "f_spatial": c.f_spatial, "f_semantic": c.f_semantic, "frontier": "*" if c.on_frontier else ""}
            for c in sorted(result.candidates, key=lambda c: (-c.score, c.poi_id))]
    table = _table(rows[:TRACE_ROWS], ["id", "distance_km", "f_sparse", "f_dense", "f_spatial", "f_semantic", "frontier"])
    lines.extend("  " + t for t in table.rstrip("\n").split("\n"))
    if len(rows) > TRACE_ROWS:
        lines.append(f"  ... {len(rows) - TRACE_ROWS} more")
    lines.append(f"[frontier] {', '.join(result.frontier)}")
    w = result.weights
    lines.append(f"[weights] lambda_s={w.lambda_s:.4f} lambda_k={w.lambda_k:.4f}")
    how = "llm rerank" if result.reranked_by_llm else "weighted sum"
    lines.append(f"[select] ({how}) {', '.join(result.ranking) if result.ranking else '(none)'}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ commands


def cmd_ingest(args) -> int:
    for p in (args.pois, args.gazetteer):
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")
    cfg = build_config(args)
    manifest = store.ingest(args.pois, args.gazetteer, args.store, make_embedder(cfg), LexiconMasker())
    print(f"ingested {manifest['count']} records and {manifest['gazetteer_count']} regions into {args.store}")
    print(f"checksum {manifest['checksum']}")
    return EXIT_OK


def cmd_index(args) -> int:
    corpus = store.load(args.store)
    idx = corpus.index
    idx.check_invariants()
    cats: dict[str, int] = {}
    for r in corpus.records:
        cats[r.category] = cats.get(r.category, 0) + 1
    print(f"records {len(idx)}  height {idx.height}  leaf capacity {idx.leaf_capacity}")
    for c in sorted(cats):
        print(f"  {c:<12}{cats[c]}")
    return EXIT_OK


def _question(args) -> tuple[Optional[str], Optional[str]]:
    if args.dsl is not None:
        return None, args.dsl
    if not args.question:
        raise UsageError("give a question or --dsl EXPR")
    return " ".join(args.question), None


def cmd_query(args) -> int:
    engine = _engine(args)
    question, dsl = _question(args)
    result = engine.run(question, args.ref or (), dsl)
    sys.stdout.write(render_query(result, engine.corpus, args.format))
    return EXIT_OK


def cmd_explain(args) -> int:
    engine = _engine(args)
    question, dsl = _question(args)
    result = engine.run(question, args.ref or (), dsl)
    sys.stdout.write(render_trace(result, engine.corpus))
    return EXIT_OK


def cmd_eval(args) -> int:
    engine = _engine(args)
    if not Path(args.qa).is_file():
        raise UsageError(f"no such file: {args.qa}")
    pairs = store.load_qa(args.qa, engine.corpus)
    if not pairs:
        raise UsageError(f"{args.qa}: no QA pairs")
    names = [b.strip().upper() for b in args.baselines.split(",") if b.strip()] if args.baselines else []
    for n in names:
        if n not in BASELINES:
            raise UsageError(f"unknown baseline {n!r}; choose from {', '.join(BASELINES)}")
    cfg = engine.config
    reports = [evaluate(engine.rank_qa, pairs, cfg.ks, cfg.as_dict(), "georank")]
    for n in names:
        ranker = baseline_ranker(n, engine.corpus, engine.embedder, engine.query_for)
        reports.append(evaluate(ranker, pairs, cfg.ks, {"baseline": n}, n))
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if args.csv:
        blocks = [r.to_csv() for r in reports]
        body = blocks[0] + "".join(b.split("\n", 1)[1] for b in blocks[1:])
        Path(args.csv).write_text(body, encoding="utf-8")
    sys.stdout.write(format_table(reports))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import generate_city

    city = generate_city(args.pois_count, args.qa_count, seed=args.seed if args.seed is not None else 7)
    paths = city.write(args.out)
    for k, p in paths.items():
        print(f"{k:<10}{p}")
    return EXIT_OK


# ------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, store_required: bool = True) -> None:
    p.add_argument("--store", required=store_required, help="store directory")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--embedder", choices=["hash", "service"])
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="count", default=0)


def _ranking_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--parser", choices=["rule", "llm", "dsl"])
    p.add_argument("--lambda-p", type=float, dest="lambda_p")
    p.add_argument("--lambda-d", type=float, dest="lambda_d")
    p.add_argument("--weights", help="heuristic | fixed:s,k | llm")
    p.add_argument("--lambda-fixed", dest="lambda_fixed", help="fixed trade-off weights s,k (implies --weights fixed)")
    p.add_argument("--topk", type=int)
    p.add_argument("--k", help="comma-separated cut-offs, e.g. 1,3,5,10")
    p.add_argument("--gateway-url", dest="gateway_url", help="chat endpoint base URL, or 'offline'")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="georank", description="Spatially constrained POI question answering.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a store from GeoJSON POIs and a gazetteer")
    p.add_argument("pois")
    p.add_argument("gazetteer", nargs="?")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="load a store, build the index and report on it")
    _common(p)
    p.set_defaults(func=cmd_index)

    for name, func, helptext in (("query", cmd_query, "answer a question"),
                                 ("explain", cmd_explain, "print every pipeline stage for a question")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("question", nargs="*")
        p.add_argument("--dsl", help="structured query expression instead of a question")
        p.add_argument("--ref", action="append", help="reference POI, region or 'lon,lat' (repeatable)")
        _common(p)
        _ranking_flags(p)
        if name == "query":
            p.add_argument("--format", choices=["table", "json", "geojson"], default="table")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="evaluate on QA pairs, optionally against baselines")
    p.add_argument("--qa", required=True, help="QA pairs, JSON lines")
    p.add_argument("--baselines", help="comma-separated subset of SD,TE,ST")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--csv", help="write a CSV summary here")
    _common(p)
    _ranking_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a generated benchmark city")
    p.add_argument("out")
    p.add_argument("--pois-count", type=int, default=1000, dest="pois_count")
    p.add_argument("--qa-count", type=int, default=100, dest="qa_count")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * getattr(args, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TransportError, TransportFailure) as exc:
        print(f"georank: external service failed: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (UsageError, DslError, NotFound, UnresolvedReference, store.IngestError, store.StoreError,
            ValueError, KeyError) as exc:
        print(f"georank: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
