"""POI corpus ingestion and the on-disk store.

Input formats
-------------
POIs: a GeoJSON FeatureCollection whose features carry ``id``, ``name``,
``category`` and an optional ``reviews`` list in ``properties``.
Gazetteer: a GeoJSON FeatureCollection of (Multi)Polygons with ``name``, an
optional ``aliases`` list and an optional ``level`` (``borough`` or
``neighborhood``; default ``neighborhood``).
QA pairs: JSON lines with ``question``, ``references`` (string or list of
strings) and a non-empty ``relevant_ids`` list; ``qid`` is optional.

Store layout (a directory)
--------------------------
``manifest.json``   format tag and version, embedder id, dimension, counts and
                    a SHA-256 per data file
``records.jsonl``   one record per line in input order, keys sorted
``gazetteer.json``  normalised gazetteer entries
``vectors.f32``     little-endian float32, row-major, shape ``(count, 2, dim)``;
                    row ``i`` holds record ``i``'s spatial then semantic vector
"""
from __future__ import annotations

import contextlib
import hashlib
import json
import os
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import geometry as geo
from .geometry import Geometry
from .index import SpatialIndex
from .query import KNOWN_CATEGORIES

STORE_FORMAT = "georank-store"
STORE_VERSION = 1
_FILES = ("records.jsonl", "gazetteer.json", "vectors.f32")


class IngestError(ValueError):
    pass


class StoreError(RuntimeError):
    pass


class StoreVersionError(StoreError):
    pass


class StoreCorruptError(StoreError):
    pass


def normalize_name(name: str) -> str:
    return " ".join(name.lower().split())


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    aliases: tuple[str, ...]
    polygon: Geometry
    level: str = "neighborhood"

    def __post_init__(self):
        if not isinstance(self.polygon, geo.AREAL):
            raise geo.InvalidGeometry(f"gazetteer entry {self.name!r} is not areal")
        object.__setattr__(self, "name", normalize_name(self.name))
        object.__setattr__(self, "aliases", tuple(normalize_name(a) for a in self.aliases))

    @property
    def all_names(self) -> tuple[str, ...]:
        return (self.name, *self.aliases)


class Gazetteer(Mapping):
    """Region name (canonical or alias, lowercase) -> polygon."""

    def __init__(self, entries: Iterable[GazetteerEntry] = ()):
        self.entries: tuple[GazetteerEntry, ...] = tuple(entries)
        self._by_name: dict[str, GazetteerEntry] = {}
        for e in self.entries:
            for n in e.all_names:
                other = self._by_name.get(n)
                if other is not None and other is not e:
                    raise IngestError(f"gazetteer name {n!r} maps to two regions")
                self._by_name[n] = e
        self._patterns = sorted(
            ((n, re.compile(r"(?<!\w)" + re.escape(n) + r"(?!\w)")) for n in self._by_name),
            key=lambda item: (-len(item[0]), item[0]),
        )

    def __getitem__(self, name: str) -> Geometry:
        return self._by_name[normalize_name(name)].polygon

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._by_name))

    def __len__(self) -> int:
        return len(self._by_name)

    def __eq__(self, other) -> bool:
        return isinstance(other, Gazetteer) and self.entries == other.entries

    def entry(self, name: str) -> GazetteerEntry:
        return self._by_name[normalize_name(name)]

    def geometry_by_name(self, name: str) -> Optional[Geometry]:
        e = self._by_name.get(normalize_name(name))
        return e.polygon if e else None

    def find_mention(self, text: str) -> Optional[tuple[str, Geometry]]:
        """Longest region name or alias occurring as whole words in ``text``."""
        low = normalize_name(text or "")
        for n, pat in self._patterns:
            if pat.search(low):
                e = self._by_name[n]
                return e.name, e.polygon
        return None

    def region_names(self) -> dict[str, list[str]]:
        boro = [e.name for e in self.entries if e.level == "borough"]
        nta = [e.name for e in self.entries if e.level != "borough"]
        return {"nta_names": nta, "boro_names": boro}

    def to_json(self) -> list:
        return [
            {"name": e.name, "aliases": list(e.aliases), "level": e.level, "geometry": geo.to_geojson(e.polygon)}
            for e in self.entries
        ]

    @classmethod
    def from_json(cls, items: list) -> "Gazetteer":
        return cls(
            GazetteerEntry(i["name"], tuple(i.get("aliases", ())), geo.from_geojson(i["geometry"]), i.get("level", "neighborhood"))
            for i in items
        )

    @classmethod
    def from_geojson(cls, obj: dict, source: str = "<gazetteer>") -> "Gazetteer":
        entries = []
        for i, feat in enumerate(_features(obj, source)):
            where = f"{source}: feature[{i}]"
            props = feat.get("properties") or {}
            name = props.get("name")
            if not isinstance(name, str) or not name.strip():
                raise IngestError(f"{where}: missing region name")
            try:
                poly = geo.from_geojson(feat.get("geometry"))
                entries.append(
                    GazetteerEntry(name, tuple(props.get("aliases") or ()), poly, props.get("level", "neighborhood"))
                )
            except geo.InvalidGeometry as exc:
                raise IngestError(f"{where} (name={name!r}): {exc}") from exc
        return cls(entries)


@dataclass(eq=False)
class PoiRecord:
    id: str
    name: str
    category: str
    geometry: Geometry
    reviews: tuple[str, ...] = ()
    spatial_summary: str = ""
    semantic_summary: str = ""
    spatial_vec: Optional[np.ndarray] = field(default=None, repr=False)
    semantic_vec: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def description(self) -> str:
        return describe(self.name, self.category, self.reviews)

    def _key(self):
        return (self.id, self.name, self.category, self.geometry, self.reviews, self.spatial_summary, self.semantic_summary)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PoiRecord) or self._key() != other._key():
            return False
        for a, b in ((self.spatial_vec, other.spatial_vec), (self.semantic_vec, other.semantic_vec)):
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        return True

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "category": self.category,
            "geometry": geo.to_geojson(self.geometry),
            "reviews": list(self.reviews),
            "spatial_summary": self.spatial_summary,
            "semantic_summary": self.semantic_summary,
        }


def describe(name: str, category: str, reviews: Sequence[str]) -> str:
    """The full text description of a POI: name, category, then each review."""
    return "\n".join([f"{name}.", f"{category}.", *reviews])


@dataclass(frozen=True)
class QaPair:
    question: str
    references: tuple[str, ...]
    relevant_ids: frozenset
    qid: str = ""


class Corpus:
    """Read-only POI collection with its gazetteer and spatial index."""

    def __init__(self, records: Sequence[PoiRecord], gazetteer: Optional[Gazetteer] = None,
                 embedder_id: str = "", dimension: int = 0):
        self.records: tuple[PoiRecord, ...] = tuple(records)
        self.gazetteer = gazetteer if gazetteer is not None else Gazetteer()
        self.embedder_id = embedder_id
        self.dimension = dimension
        self.by_id: dict[str, PoiRecord] = {}
        for r in self.records:
            if r.id in self.by_id:
                raise IngestError(f"duplicate id {r.id!r}")
            self.by_id[r.id] = r
        self._by_name: dict[str, PoiRecord] = {}
        for r in self.records:
            self._by_name.setdefault(normalize_name(r.name), r)
        self.index = SpatialIndex.build(
            ((r.id, r.geometry) for r in self.records), {r.id: r.category for r in self.records}
        )
        self._desc_vectors: dict = {}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PoiRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Corpus)
            and self.records == other.records
            and self.gazetteer == other.gazetteer
            and self.embedder_id == other.embedder_id
            and self.dimension == other.dimension
        )

    def record(self, poi_id: str) -> PoiRecord:
        return self.by_id[poi_id]

    def geometry_by_name(self, name: str) -> Optional[Geometry]:
        r = self._by_name.get(normalize_name(name))
        return r.geometry if r else None

    def find_name_mentions(self, text: str) -> list[PoiRecord]:
        """POIs whose full name appears in ``text`` as whole words, in order of appearance."""
        low = normalize_name(text or "")
        hits = []
        for n, r in self._by_name.items():
            m = re.search(r"(?<!\w)" + re.escape(n) + r"(?!\w)", low)
            if m:
                hits.append((m.start(), -len(n), r))
        hits.sort(key=lambda h: (h[0], h[1]))
        out, taken = [], []
        for start, neg_len, r in hits:
            end = start - neg_len
            if any(s < end and start < e for s, e in taken):
                continue
            taken.append((start, end))
            out.append(r)
        return out

    def description_vector(self, poi_id: str, embedder) -> np.ndarray:
        """Embedding of the full description (unmasked); cached per embedder."""
        key = (embedder.identifier, poi_id)
        v = self._desc_vectors.get(key)
        if v is None:
            v = embedder.embed(self.by_id[poi_id].description)
            self._desc_vectors[key] = v
        return v


# ------------------------------------------------------------------ ingest


def _features(obj, source: str) -> list:
    if not isinstance(obj, dict) or obj.get("type") != "FeatureCollection":
        raise IngestError(f"{source}: expected a GeoJSON FeatureCollection")
    feats = obj.get("features")
    if not isinstance(feats, list):
        raise IngestError(f"{source}: 'features' must be a list")
    return feats


def _read_json(path: os.PathLike) -> object:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return {"type": "FeatureCollection", "features": []}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON ({exc})") from exc


def parse_pois(obj: dict, source: str = "<pois>") -> list[dict]:
    """Validate POI features and return plain field dicts in input order."""
    out, seen = [], set()
    for i, feat in enumerate(_features(obj, source)):
        props = (feat or {}).get("properties") or {}
        pid = props.get("id", feat.get("id") if isinstance(feat, dict) else None)
        where = f"{source}: feature[{i}]" + (f" (id={pid!r})" if pid is not None else "")
        if pid is None or str(pid).strip() == "":
            raise IngestError(f"{where}: missing id")
        pid = str(pid)
        if pid in seen:
            raise IngestError(f"{where}: duplicate id")
        seen.add(pid)
        category = props.get("category")
        if category not in KNOWN_CATEGORIES:
            raise IngestError(f"{where}: unknown category {category!r}")
        name = props.get("name")
        if not isinstance(name, str) or not name.strip():
            raise IngestError(f"{where}: missing name")
        reviews = props.get("reviews") or []
        if not isinstance(reviews, list) or not all(isinstance(r, str) for r in reviews):
            raise IngestError(f"{where}: reviews must be a list of strings")
        try:
            g = geo.from_geojson(feat.get("geometry"))
        except geo.InvalidGeometry as exc:
            raise IngestError(f"{where}: malformed geometry: {exc}") from exc
        out.append({"id": pid, "name": name.strip(), "category": category, "geometry": g, "reviews": tuple(reviews)})
    return out


def build_corpus(poi_obj: dict, gazetteer: Gazetteer, embedder, masker, source: str = "<pois>") -> Corpus:
    """In-memory ingest: normalise records, compute masked views and vectors."""
    records = []
    for f in parse_pois(poi_obj, source):
        text = describe(f["name"], f["category"], f["reviews"])
        spatial = masker.spatial_view(text)
        semantic = masker.semantic_view(text)
        records.append(
            PoiRecord(
                **f,
                spatial_summary=spatial,
                semantic_summary=semantic,
                spatial_vec=np.asarray(embedder.embed(spatial), dtype=np.float32),
                semantic_vec=np.asarray(embedder.embed(semantic), dtype=np.float32),
            )
        )
    return Corpus(records, gazetteer, embedder.identifier, embedder.dimension)


@contextlib.contextmanager
def _exclusive(store: Path):
    lock = store / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise StoreError(f"{store} is locked by another ingest ({lock})") from exc
    try:
        yield
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def save(corpus: Corpus, store_path: os.PathLike) -> dict:
    store = Path(store_path)
    store.mkdir(parents=True, exist_ok=True)
    dim = corpus.dimension
    records = "".join(_dumps(r.to_json()) + "\n" for r in corpus.records).encode("utf-8")
    gaz = (_dumps(corpus.gazetteer.to_json()) + "\n").encode("utf-8")
    vecs = np.zeros((len(corpus), 2, dim), dtype="<f4")
    for i, r in enumerate(corpus.records):
        vecs[i, 0] = r.spatial_vec
        vecs[i, 1] = r.semantic_vec
    blobs = {"records.jsonl": records, "gazetteer.json": gaz, "vectors.f32": vecs.tobytes(order="C")}
    files = {name: _sha256(blob) for name, blob in blobs.items()}
    manifest = {
        "format": STORE_FORMAT,
        "format_version": STORE_VERSION,
        "embedder": corpus.embedder_id,
        "dimension": dim,
        "count": len(corpus),
        "gazetteer_count": len(corpus.gazetteer.entries),
        "vector_layout": "float32 little-endian row-major (count, 2, dimension): spatial, semantic",
        "files": files,
        "checksum": _sha256(_dumps(files).encode("utf-8")),
    }
    with _exclusive(store):
        for name, blob in blobs.items():
            (store / name).write_bytes(blob)
        (store / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest


def ingest(poi_file: os.PathLike, gazetteer_file: Optional[os.PathLike], store_path: os.PathLike,
           embedder, masker) -> dict:
    """Read input files, precompute views and vectors, and write the store.

    Returns the manifest.  Identical inputs with a deterministic embedder give
    a byte-identical store.
    """
    poi_obj = _read_json(poi_file)
    if gazetteer_file is not None:
        gazetteer = Gazetteer.from_geojson(_read_json(gazetteer_file), str(gazetteer_file))
    else:
        gazetteer = Gazetteer()
    corpus = build_corpus(poi_obj, gazetteer, embedder, masker, str(poi_file))
    return save(corpus, store_path)


def load(store_path: os.PathLike) -> Corpus:
    store = Path(store_path)
    mpath = store / "manifest.json"
    if not mpath.exists():
        raise StoreError(f"no store at {store} (missing manifest.json)")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreCorruptError(f"{mpath}: unreadable manifest") from exc
    if manifest.get("format") != STORE_FORMAT or manifest.get("format_version") != STORE_VERSION:
        raise StoreVersionError(
            f"{store}: store format {manifest.get('format')!r} v{manifest.get('format_version')!r}, "
            f"expected {STORE_FORMAT!r} v{STORE_VERSION}"
        )
    blobs = {}
    for name in _FILES:
        p = store / name
        if not p.exists():
            raise StoreCorruptError(f"{store}: missing {name}")
        blobs[name] = p.read_bytes()
        if _sha256(blobs[name]) != manifest["files"].get(name):
            raise StoreCorruptError(f"{store}: checksum mismatch for {name}")
    n, dim = manifest["count"], manifest["dimension"]
    vecs = np.frombuffer(blobs["vectors.f32"], dtype="<f4")
    if vecs.size != n * 2 * dim:
        raise StoreCorruptError(f"{store}: vector file size does not match manifest")
    vecs = vecs.reshape(n, 2, dim).astype(np.float32)
    lines = blobs["records.jsonl"].decode("utf-8").splitlines()
    if len(lines) != n:
        raise StoreCorruptError(f"{store}: record count does not match manifest")
    records = []
    for i, line in enumerate(lines):
        d = json.loads(line)
        records.append(
            PoiRecord(
                id=d["id"], name=d["name"], category=d["category"], geometry=geo.from_geojson(d["geometry"]),
                reviews=tuple(d["reviews"]), spatial_summary=d["spatial_summary"],
                semantic_summary=d["semantic_summary"], spatial_vec=vecs[i, 0].copy(), semantic_vec=vecs[i, 1].copy(),
            )
        )
    gazetteer = Gazetteer.from_json(json.loads(blobs["gazetteer.json"]))
    return Corpus(records, gazetteer, manifest["embedder"], dim)


def load_qa(path: os.PathLike, corpus: Optional[Corpus] = None) -> list[QaPair]:
    """Read QA pairs from JSON lines; every relevant id must exist in ``corpus``."""
    pairs = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        pairs.append(qa_from_dict(d, corpus, f"{path}:{lineno}"))
    return pairs


def qa_from_dict(d: dict, corpus: Optional[Corpus] = None, where: str = "<qa>") -> QaPair:
    question = d.get("question")
    if not isinstance(question, str) or not question.strip():
        raise IngestError(f"{where}: missing question")
    refs = d.get("references", d.get("reference_spec", []))
    if isinstance(refs, str):
        refs = [refs]
    rel = d.get("relevant_ids")
    if not isinstance(rel, list) or not rel:
        raise IngestError(f"{where}: relevant_ids must be a non-empty list")
    rel = frozenset(str(r) for r in rel)
    if corpus is not None:
        missing = sorted(r for r in rel if r not in corpus.by_id)
        if missing:
            raise IngestError(f"{where}: unknown relevant ids {missing}")
    return QaPair(question, tuple(str(r) for r in refs), rel, str(d.get("qid", "")))
