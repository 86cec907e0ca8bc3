"""Chat-completion gateway for the spatial-extraction, intent and rerank prompts.

The prompt bodies live in ``prompts/*.v1.txt`` and are used verbatim; only the
placeholder expressions they contain are substituted.  A transport is any
callable taking a list of chat messages and returning the reply text, which
keeps the HTTP client, the test stub and the replay fixture interchangeable.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Sequence
from urllib.parse import urlsplit

import httpx
import jsonschema

from . import geometry as geo
from .query import (
    QueryIntent,
    QueryKind,
    SpatialQuery,
    UnresolvedReference,
    estimate_epsilon,
)

log = logging.getLogger(__name__)

REPAIR_SUFFIX = (
    "\n\nYour previous reply could not be parsed. "
    "Reply again with only the JSON requested above, with no comments or extra text."
)


class GatewayError(RuntimeError):
    pass


class TransportFailure(GatewayError):
    pass


class SchemaFailure(GatewayError):
    pass


# ------------------------------------------------------------ templates


def _json_places(b):
    return json.dumps(b["places"], ensure_ascii=False, indent=2)


# placeholder expression (as written in the prompt) -> (binding names, renderer)
_PLACEHOLDERS: dict[str, dict[str, tuple[tuple[str, ...], Callable[[dict], str]]]] = {
    "spatial_extract": {
        "user_query": (("user_query",), lambda b: str(b["user_query"])),
        "location_count": (("location_count",), lambda b: str(b["location_count"])),
        "is_multi_point": (("is_multi_point",), lambda b: str(b["is_multi_point"])),
        "location_count == 1": (("location_count",), lambda b: str(b["location_count"] == 1)),
        "location_count == 2": (("location_count",), lambda b: str(b["location_count"] == 2)),
        "location_count > 2": (("location_count",), lambda b: str(b["location_count"] > 2)),
        "', '.join(region_names['nta_names'])": (
            ("region_names",), lambda b: ", ".join(b["region_names"]["nta_names"])),
        "', '.join(region_names['boro_names'])": (
            ("region_names",), lambda b: ", ".join(b["region_names"]["boro_names"])),
    },
    "intent_extract": {
        "user_query": (("user_query",), lambda b: str(b["user_query"])),
    },
    "rerank": {
        "query_constraints['spatial_constraints']": (
            ("query_constraints",), lambda b: str(b["query_constraints"]["spatial_constraints"])),
        "query_constraints['user_constraints']": (
            ("query_constraints",), lambda b: str(b["query_constraints"]["user_constraints"])),
        "json.dumps(places, ensure_ascii=False, indent=2)": (("places",), _json_places),
        "len(places)": (("places",), lambda b: str(len(b["places"]))),
    },
}

_NULLABLE_STR = {"type": ["string", "null"]}
_POSITIVE_OR_NULL = {"anyOf": [{"type": "null"}, {"type": "number", "exclusiveMinimum": 0}]}

SCHEMAS = {
    "spatial_extract": {
        "type": "object",
        "required": ["query_type"],
        "properties": {
            "query_type": {"enum": ["point", "route", "region"]},
            "region": _NULLABLE_STR,
            "distance_km": _POSITIVE_OR_NULL,
            "buffer_distance": _POSITIVE_OR_NULL,
        },
    },
    "intent_extract": {
        "type": "object",
        "required": ["type"],
        "properties": {
            "type": {"enum": ["R", "H", "A"]},
            "spatial_constraints": _NULLABLE_STR,
            "user_constraints": _NULLABLE_STR,
        },
    },
    "rerank": {"type": "array", "items": {"type": "integer", "minimum": 0}},
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(_PLACEHOLDERS[self.name])

    @property
    def required_bindings(self) -> frozenset:
        return frozenset(n for names, _ in _PLACEHOLDERS[self.name].values() for n in names)

    def render(self, bindings: dict) -> str:
        missing = self.required_bindings - set(bindings)
        if missing:
            raise ValueError(f"unbound placeholders for {self.name}: {sorted(missing)}")
        text = self.body
        for expr, (_, fn) in _PLACEHOLDERS[self.name].items():
            text = text.replace("{" + expr + "}", fn(bindings))
        return text


def placeholder_expressions(body: str) -> set[str]:
    """Single-line ``{...}`` expressions in a prompt body (multi-line JSON blocks excluded)."""
    return set(re.findall(r"\{([^{}\n]+)\}", body))


def load_template(name: str, version: str = "v1") -> PromptTemplate:
    if name not in _PLACEHOLDERS:
        raise KeyError(f"unknown template {name!r}")
    body = resources.files("georank").joinpath("prompts", f"{name}.{version}.txt").read_text(encoding="utf-8")
    return PromptTemplate(name, version, body)


# ------------------------------------------------------------ parsing


def extract_json(raw: str) -> Any:
    """Parse the first JSON value in a reply, tolerating code fences and trailing commas."""
    text = raw.strip()
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.S)
    if fence:
        text = fence.group(1).strip()
    starts = [i for i in (text.find("{"), text.find("[")) if i >= 0]
    if not starts:
        raise ValueError("no JSON value in reply")
    text = text[min(starts):]
    text = re.sub(r",\s*([}\]])", r"\1", text)
    value, _ = json.JSONDecoder().raw_decode(text)
    return value


@dataclass(frozen=True)
class GatewayResponse:
    raw: str
    parsed: Any


# ------------------------------------------------------------ transports


class StubTransport:
    """Replies from a fixed list (the last reply repeats) or a callable."""

    def __init__(self, replies):
        self._replies = replies
        self.calls: list[list[dict]] = []

    def __call__(self, messages: list[dict]) -> str:
        self.calls.append(messages)
        if callable(self._replies):
            return self._replies(messages)
        if isinstance(self._replies, str):
            return self._replies
        i = min(len(self.calls), len(self._replies)) - 1
        return self._replies[i]


def _messages_key(messages: list[dict]) -> str:
    return hashlib.sha256(json.dumps(messages, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()


class RecordedTransport:
    """Replays stored replies keyed by the request; records through ``inner`` when missing."""

    def __init__(self, fixture_dir: os.PathLike, inner: Optional[Callable] = None):
        self.fixture_dir = Path(fixture_dir)
        self.inner = inner

    def __call__(self, messages: list[dict]) -> str:
        path = self.fixture_dir / f"{_messages_key(messages)}.txt"
        if path.exists():
            return path.read_bytes().decode("utf-8")
        if self.inner is None:
            raise TransportFailure(f"no recorded reply for request {path.name}")
        raw = self.inner(messages)
        self.fixture_dir.mkdir(parents=True, exist_ok=True)
        path.write_bytes(raw.encode("utf-8"))
        return raw


class HttpChatTransport:
    """OpenAI-compatible ``POST {base_url}/chat/completions`` client."""

    _host_limits: dict[str, threading.Semaphore] = {}
    _limits_lock = threading.Lock()

    def __init__(self, base_url: str, model: str, token_env: str = "LLM_API_KEY",
                 max_concurrency: int = 4, timeout: float = 60.0, client: Optional[httpx.Client] = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.token_env = token_env
        self._client = client or httpx.Client(timeout=timeout)
        host = urlsplit(self.base_url).netloc
        with self._limits_lock:
            self._sem = self._host_limits.setdefault(host, threading.Semaphore(max_concurrency))

    def __call__(self, messages: list[dict]) -> str:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.model, "messages": messages, "temperature": 0}
        log.debug("POST %s/chat/completions headers=%s body=%s", self.base_url,
                  {k: ("<redacted>" if k == "Authorization" else v) for k, v in headers.items()},
                  json.dumps(body)[:2000])
        with self._sem:
            try:
                resp = self._client.post(f"{self.base_url}/chat/completions", json=body, headers=headers)
                resp.raise_for_status()
                data = resp.json()
                content = data["choices"][0]["message"]["content"]
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportFailure(f"chat completion failed: {exc}") from exc
        log.debug("reply: %s", content[:2000])
        return content


# ------------------------------------------------------------ gateway


class ChatGateway:
    """Renders a template, calls the transport, validates the reply.

    A reply that fails to parse or validate is retried once with a repair
    suffix; ``max_attempts`` counts the first call.  Validated responses are
    cached by template and bindings.
    """

    def __init__(self, transport: Callable[[list[dict]], str], max_attempts: int = 2,
                 cache_dir: Optional[os.PathLike] = None):
        self.transport = transport
        self.max_attempts = max_attempts
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._cache: dict[str, GatewayResponse] = {}
        self._templates: dict[str, PromptTemplate] = {}
        self._lock = threading.Lock()

    def template(self, name: str) -> PromptTemplate:
        if name not in self._templates:
            self._templates[name] = load_template(name)
        return self._templates[name]

    def _cache_key(self, template: PromptTemplate, bindings: dict) -> str:
        payload = json.dumps([template.name, template.version, bindings], sort_keys=True, default=str, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def complete(self, template, bindings: dict) -> GatewayResponse:
        if isinstance(template, str):
            template = self.template(template)
        key = self._cache_key(template, bindings)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.cache_dir is not None:
            path = self.cache_dir / f"{key}.json"
            if path.exists():
                stored = json.loads(path.read_text(encoding="utf-8"))
                resp = GatewayResponse(stored["raw"], stored["parsed"])
                with self._lock:
                    self._cache[key] = resp
                return resp

        prompt = template.render(bindings)
        schema = SCHEMAS[template.name]
        content = prompt
        last_error = None
        for _ in range(max(1, self.max_attempts)):
            raw = self.transport([{"role": "user", "content": content}])
            try:
                parsed = extract_json(raw)
                jsonschema.validate(parsed, schema)
            except (ValueError, jsonschema.ValidationError) as exc:
                last_error = exc
                content = prompt + REPAIR_SUFFIX
                continue
            resp = GatewayResponse(raw, parsed)
            with self._lock:
                self._cache[key] = resp
            if self.cache_dir is not None:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                (self.cache_dir / f"{key}.json").write_text(
                    json.dumps({"raw": raw, "parsed": parsed}, sort_keys=True), encoding="utf-8")
            return resp
        raise SchemaFailure(f"{template.name}: reply failed validation after {self.max_attempts} attempts: {last_error}")


_TYPE_TO_CATEGORY = {"R": "restaurant", "H": "hotel", "A": "attraction"}


def parse_with_llm(
    question: str,
    resolved_points: Sequence[Any],
    gazetteer: Any,
    gateway: ChatGateway,
) -> tuple[SpatialQuery, QueryIntent]:
    """Build the query and intent from the spatial-extraction and intent prompts.

    Raises :class:`GatewayError` when either reply is unusable; callers fall
    back to the rule-based parser.
    """
    points = tuple(p if isinstance(p, geo.Point) else geo.Point(*geo.as_coord(p)) for p in resolved_points)
    n = len(points)
    region_names = gazetteer.region_names() if hasattr(gazetteer, "region_names") else {
        "nta_names": sorted(gazetteer or ()), "boro_names": []}
    spatial = gateway.complete("spatial_extract", {
        "user_query": question,
        "location_count": n,
        "is_multi_point": n > 1,
        "region_names": region_names,
    }).parsed
    intent_raw = gateway.complete("intent_extract", {"user_query": question}).parsed

    intent = QueryIntent(
        intent_raw.get("spatial_constraints") or "",
        intent_raw.get("user_constraints") or "",
        _TYPE_TO_CATEGORY[intent_raw["type"]],
    )
    category = intent.target_category
    qtype = spatial["query_type"]

    if qtype == "region" and spatial.get("region"):
        poly = None
        if gazetteer is not None:
            getter = getattr(gazetteer, "geometry_by_name", None)
            poly = getter(spatial["region"]) if getter else gazetteer.get(spatial["region"].lower())
        if poly is not None:
            sq = SpatialQuery(QueryKind.REGION_CONTAIN, (poly,), category, None, question,
                              region_name=spatial["region"].lower())
            return sq, intent
    if qtype == "route" and n == 2 and points[0] != points[1]:
        buf = spatial.get("buffer_distance")
        eps = buf / 1000.0 if buf else estimate_epsilon(question, QueryKind.ROUTE_BUFFER)
        return SpatialQuery(QueryKind.ROUTE_BUFFER, points, category, eps, question), intent
    if n == 0:
        raise UnresolvedReference("model chose a point query but no reference point is known")
    eps = spatial.get("distance_km") or estimate_epsilon(question, QueryKind.POINT_RADIUS)
    return SpatialQuery(QueryKind.POINT_RADIUS, points, category, float(eps), question), intent


def _quoted_query(prompt: str) -> str:
    m = re.match(r'Analyze the following user query and extract [a-z ]+: "(.*?)"\n\n', prompt, re.S)
    return m.group(1) if m else ""


def offline_reply(messages: list[dict]) -> str:
    """Deterministic stand-in for a chat model, answering each prompt by rule.

    Spatial extraction leaves distances null so the caller's phrase rules
    apply; intent extraction uses the keyword classifier and cue splitter;
    reranking returns the identity permutation.
    """
    from . import lexicon
    from .query import classify_category

    prompt = messages[-1]["content"]
    if prompt.startswith("As a local recommendation expert"):
        m = re.search(r"input place count \((\d+)\)", prompt)
        return json.dumps(list(range(int(m.group(1)) if m else 0)))
    question = _quoted_query(prompt)
    if "extract spatial information" in prompt:
        count = int(re.search(r"Number of location points: (\d+)", prompt).group(1))
        qtype = "route" if count == 2 and lexicon.has_route_cue(question) else "point"
        return json.dumps({"query_type": qtype, "region": None, "distance_km": None, "buffer_distance": None})
    spatial, semantic = lexicon.split_by_cue(question)
    letter = {"restaurant": "R", "hotel": "H", "attraction": "A"}[classify_category(question)]
    return json.dumps({"type": letter, "spatial_constraints": spatial or None, "user_constraints": semantic or None})
