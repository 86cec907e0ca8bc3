"""Text encoders and masking views.

``HashEmbedder`` is the deterministic default: signed feature hashing of
lowercased word unigrams into 256 buckets, L2-normalised.  ``ServiceEmbedder``
talks to an HTTP embedding endpoint and caches vectors on disk.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx
import numpy as np

from . import lexicon

log = logging.getLogger(__name__)


class Embedder(Protocol):
    identifier: str
    dimension: int
    deterministic: bool

    def embed(self, text: str) -> np.ndarray: ...


class TransportError(RuntimeError):
    """An external service could not be reached or answered with an error."""


def _token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


class HashEmbedder:
    deterministic = True

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.identifier = f"hash-blake2b-{dimension}-v1"

    def embed(self, text: str) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=np.float64)
        for tok in lexicon.words(text or ""):
            h = _token_hash(tok)
            # low bits pick the bucket, the top bit picks the sign
            v[h % self.dimension] += -1.0 if h >> 63 else 1.0
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension))
        return np.stack([self.embed(t) for t in texts])


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


class ServiceEmbedder:
    """Client for an OpenAI-style ``POST {base_url}/embeddings`` endpoint.

    Responses are cached under ``cache_dir`` keyed by model and text hash, so
    re-ingesting the same corpus does not hit the service again.
    """

    deterministic = False

    def __init__(
        self,
        base_url: str,
        model: str,
        dimension: int,
        api_key_env: str = "EMBEDDING_API_KEY",
        cache_dir: Optional[os.PathLike] = None,
        client: Optional[httpx.Client] = None,
        batch_size: int = 64,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dimension = dimension
        self.identifier = f"service:{model}:{dimension}"
        self.api_key_env = api_key_env
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.batch_size = batch_size
        self._client = client or httpx.Client(timeout=timeout)
        self._lock = threading.Lock()

    def _cache_path(self, text: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        key = hashlib.sha256(f"{self.model}\0{text}".encode("utf-8")).hexdigest()
        return self.cache_dir / f"{key}.json"

    def _request(self, texts: list[str]) -> list[list[float]]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        log.debug("POST %s/embeddings model=%s n=%d", self.base_url, self.model, len(texts))
        try:
            resp = self._client.post(
                f"{self.base_url}/embeddings", json={"model": self.model, "input": texts}, headers=headers
            )
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise TransportError(f"embedding service failed: {exc}") from exc
        data = body.get("data") if isinstance(body, dict) else None
        if not isinstance(data, list) or len(data) != len(texts):
            raise TransportError("embedding service returned a malformed body")
        data = sorted(data, key=lambda d: d.get("index", 0))
        return [d["embedding"] for d in data]

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        out: list = [None] * len(texts)
        missing = []
        for i, t in enumerate(texts):
            path = self._cache_path(t)
            if path is not None and path.exists():
                out[i] = np.asarray(json.loads(path.read_text()), dtype=np.float64)
            else:
                missing.append(i)
        for start in range(0, len(missing), self.batch_size):
            chunk = missing[start : start + self.batch_size]
            vectors = self._request([texts[i] for i in chunk])
            for i, vec in zip(chunk, vectors):
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (self.dimension,) or not np.isfinite(arr).all():
                    raise TransportError(f"bad embedding shape {arr.shape} for dimension {self.dimension}")
                out[i] = arr
                path = self._cache_path(texts[i])
                if path is not None:
                    with self._lock:
                        path.parent.mkdir(parents=True, exist_ok=True)
                        path.write_text(json.dumps(arr.tolist()))
        if not out:
            return np.zeros((0, self.dimension))
        return np.stack(out)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


class LexiconMasker:
    """Sentence-level masking: sentences with a spatial cue form the spatial view,
    the rest form the semantic view."""

    def spatial_view(self, text: str) -> str:
        return lexicon.split_by_cue(text)[0]

    def semantic_view(self, text: str) -> str:
        return lexicon.split_by_cue(text)[1]
