"""Text embedding: a remote embeddings endpoint or an offline feature-hashing embedder.

Both providers sit behind :class:`EmbedderConfig`. Its fingerprint is stored
in the index manifest so queries can never be embedded with a different
model than the one that built the index.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx
import numpy as np

from ragline.chunker import DEFAULT_COUNTER
from ragline.errors import DimensionMismatchError, EmbeddingServiceError

log = logging.getLogger(__name__)

API_KEY_ENV = "RAGLINE_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
SUB_BATCH = 64
MAX_IN_FLIGHT = 4
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5
LONG_INPUT_UNITS = 8000

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_WORD = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class EmbedderConfig:
    provider: str = "hash"
    model_id: str = "text-embedding-ada-002"
    dim: int = 1536
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.provider not in ("remote", "hash"):
            raise ValueError(f"unknown embedding provider {self.provider!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        digest = hashlib.sha256(blob).hexdigest()[:16]
        name = self.model_id if self.provider == "remote" else "hash"
        return f"{name}/{self.dim}/{digest}"

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedderConfig":
        return cls(**{k: d[k] for k in ("provider", "model_id", "dim", "normalize", "seed") if k in d})


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def hash_features(text: str) -> list[str]:
    words = _WORD.findall(text.lower())
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def hash_embed(text: str, dim: int = 1536, seed: int = 0, normalize: bool = True) -> np.ndarray:
    """Signed feature-hashing embedding over word unigrams and bigrams.

    Each feature is hashed with 64-bit FNV-1a, xor-ed with ``seed``; the bucket
    is ``h % dim`` and bit 63 picks the sign. Empty text gives the zero vector.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    acc = np.zeros(dim, dtype=np.float64)
    for feat in hash_features(text):
        h = fnv1a_64(feat.encode("utf-8")) ^ seed
        acc[h % dim] += -1.0 if h >> 63 else 1.0
    if normalize:
        norm = np.linalg.norm(acc)
        if norm > 0:
            acc /= norm
    return acc.astype(np.float32)


class EmbeddingCache:
    """Append-only JSONL cache of vectors keyed by (fingerprint, sha256 of text)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        row = json.loads(line)
                        self._entries[(row["fingerprint"], row["key"])] = np.asarray(row["vector"], dtype=np.float32)

    @staticmethod
    def key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def get(self, fingerprint: str, text: str) -> Optional[np.ndarray]:
        return self._entries.get((fingerprint, self.key(text)))

    def put(self, fingerprint: str, text: str, vector: np.ndarray) -> None:
        k = (fingerprint, self.key(text))
        with self._lock:
            if k in self._entries:
                return
            self._entries[k] = vector
            self.path.parent.mkdir(parents=True, exist_ok=True)
            row = {"fingerprint": fingerprint, "key": k[1], "vector": [float(x) for x in vector]}
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(row) + "\n")

    def __len__(self):
        return len(self._entries)


class RemoteEmbeddingClient:
    """Client for an embeddings endpoint speaking the common ``/embeddings`` JSON shape."""

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        timeout: float = 60.0,
        sleep=time.sleep,
    ):
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise EmbeddingServiceError(f"embedding service error: credentials missing (set {API_KEY_ENV})")
        self._http = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
            timeout=timeout,
        )
        self._sleep = sleep

    def close(self):
        self._http.close()

    def embed(self, texts: Sequence[str], model: str, dim: int) -> list[np.ndarray]:
        body = {"model": model, "input": list(texts)}
        last_error: Optional[EmbeddingServiceError] = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                self._sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
            try:
                resp = self._http.post("/embeddings", json=body)
            except httpx.TransportError as exc:
                last_error = EmbeddingServiceError(f"embedding service error: {exc}")
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = EmbeddingServiceError(
                    f"embedding service error: HTTP {resp.status_code}", status=resp.status_code
                )
                continue
            if resp.status_code >= 400:
                raise EmbeddingServiceError(f"embedding service error: HTTP {resp.status_code}", status=resp.status_code)
            return self._parse(resp, len(texts), dim)
        raise last_error

    @staticmethod
    def _parse(resp: httpx.Response, n: int, dim: int) -> list[np.ndarray]:
        try:
            data = sorted(resp.json()["data"], key=lambda d: d["index"])
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbeddingServiceError(f"embedding service error: malformed response ({exc})", resp.status_code)
        if len(data) != n:
            raise EmbeddingServiceError(
                f"embedding service error: expected {n} embeddings, got {len(data)}", resp.status_code
            )
        vectors = []
        for item in data:
            vec = np.asarray(item["embedding"], dtype=np.float32)
            if vec.shape != (dim,):
                raise DimensionMismatchError(dim, vec.size)
            if not np.all(np.isfinite(vec)):
                raise EmbeddingServiceError("embedding service error: non-finite values in response")
            vectors.append(vec)
        return vectors


def embed_batch(
    texts: Sequence[str],
    config: EmbedderConfig,
    client: Optional[RemoteEmbeddingClient] = None,
    cache: Optional[EmbeddingCache] = None,
    max_in_flight: int = MAX_IN_FLIGHT,
) -> list[np.ndarray]:
    """One float32 vector of length ``config.dim`` per input text, in input order."""
    texts = list(texts)
    if not texts:
        raise ValueError("embed_batch needs at least one text")
    fp = config.fingerprint
    out: list[Optional[np.ndarray]] = [None] * len(texts)
    todo = []
    for i, t in enumerate(texts):
        hit = cache.get(fp, t) if cache is not None else None
        if hit is not None:
            out[i] = hit
        else:
            todo.append(i)

    if config.provider == "hash":
        for i in todo:
            out[i] = hash_embed(texts[i], config.dim, config.seed, config.normalize)
    elif todo:
        owns_client = client is None
        client = client or RemoteEmbeddingClient()
        for i in todo:
            if DEFAULT_COUNTER.count(texts[i]) > LONG_INPUT_UNITS:
                log.warning("input %d exceeds %d units; the service may truncate it", i, LONG_INPUT_UNITS)
        batches = [todo[j : j + SUB_BATCH] for j in range(0, len(todo), SUB_BATCH)]
        try:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                results = pool.map(lambda b: client.embed([texts[i] for i in b], config.model_id, config.dim), batches)
                for batch, vectors in zip(batches, results):
                    for i, v in zip(batch, vectors):
                        out[i] = v
        finally:
            if owns_client:
                client.close()

    if cache is not None:
        for i in todo:
            cache.put(fp, texts[i], out[i])
    return out


class Embedder:
    """An :class:`EmbedderConfig` bound to its client and optional cache."""

    def __init__(
        self,
        config: EmbedderConfig = EmbedderConfig(),
        client: Optional[RemoteEmbeddingClient] = None,
        cache: Optional[EmbeddingCache] = None,
    ):
        self.config = config
        self.client = client
        self.cache = cache

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    @property
    def dim(self) -> int:
        return self.config.dim

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return embed_batch(texts, self.config, client=self.client, cache=self.cache)

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]
