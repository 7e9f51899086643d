"""Exact in-process vector index with JSONL persistence.

Every query scores all stored vectors, so results are exact and easy to
check against a linear scan. Scores always follow "larger is better": for
euclidean the score is the negated distance.

On disk an index is a directory holding ``manifest.json`` and
``records.jsonl``. The manifest carries a SHA-256 of the records file, and
vectors are written with the shortest decimal form that round-trips their
float32 value.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from ragline.errors import DimensionMismatchError, IndexFormatError

INDEX_VERSION = 1
METRICS = ("cosine", "euclidean", "dot")
MANIFEST_FILE = "manifest.json"
RECORDS_FILE = "records.jsonl"

MetadataFilter = Union[Mapping[str, str], Callable[[Mapping[str, str]], bool], None]


@dataclass
class VectorRecord:
    id: str
    vector: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)
    text: str = ""

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32)
        self.metadata = {str(k): str(v) for k, v in self.metadata.items()}


@dataclass(frozen=True)
class QueryResult:
    id: str
    score: float
    metadata: dict
    text: str

    def to_dict(self) -> dict:
        return {"id": self.id, "score": self.score, "metadata": dict(self.metadata), "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "QueryResult":
        return cls(d["id"], float(d["score"]), dict(d["metadata"]), d["text"])


@dataclass(frozen=True)
class StoreManifest:
    version: int
    dim: int
    metric: str
    count: int
    embedder_fingerprint: str
    records_sha256: str = ""

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dim": self.dim,
            "metric": self.metric,
            "count": self.count,
            "embedder_fingerprint": self.embedder_fingerprint,
            "records_sha256": self.records_sha256,
        }


def _check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def similarity(a, b, metric: str = "cosine") -> float:
    """Cosine similarity, euclidean distance, or dot product of two vectors.

    Cosine is defined as 0 when either vector has zero norm.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.size, b.size)
    _check_metric(metric)
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    dot = float(a @ b)
    if metric == "dot":
        return dot
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def _matches(meta: Mapping[str, str], flt: MetadataFilter) -> bool:
    if flt is None:
        return True
    if callable(flt):
        return bool(flt(meta))
    return all(meta.get(k) == str(v) for k, v in flt.items())


def _float32_repr(x: np.float32) -> str:
    return np.format_float_positional(x, unique=True, trim="-")


class VectorStore:
    """Flat exact index over float32 vectors of a fixed dimension.

    Queries may run concurrently with each other; ``upsert`` and ``save``
    take the write lock and must not overlap with queries.
    """

    def __init__(self, dim: int, metric: str = "cosine", embedder_fingerprint: str = ""):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.metric = _check_metric(metric)
        self.embedder_fingerprint = embedder_fingerprint
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        self._meta: list[dict[str, str]] = []
        self._text: list[str] = []
        self._vec32 = np.zeros((0, dim), dtype=np.float32)
        self._mat = np.zeros((0, dim), dtype=np.float64)
        self._norms = np.zeros(0, dtype=np.float64)
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, id: str) -> bool:
        return id in self._pos

    @property
    def manifest(self) -> StoreManifest:
        return StoreManifest(INDEX_VERSION, self.dim, self.metric, len(self), self.embedder_fingerprint)

    def ids(self) -> list[str]:
        return list(self._ids)

    def get(self, id: str) -> VectorRecord:
        i = self._pos[id]
        return VectorRecord(id, self._vec32[i].copy(), dict(self._meta[i]), self._text[i])

    def records(self) -> list[VectorRecord]:
        return [self.get(i) for i in self._ids]

    def upsert(self, records: Sequence[VectorRecord]) -> int:
        """Insert or replace records by id. Returns how many records were written."""
        records = list(records)
        for r in records:
            if r.vector.ndim != 1 or r.vector.shape[0] != self.dim:
                raise DimensionMismatchError(self.dim, r.vector.size, record_id=r.id)
            if not np.all(np.isfinite(r.vector)):
                raise ValueError(f"record {r.id!r} has non-finite values")
        with self._write_lock:
            vec32 = list(self._vec32)
            for r in records:
                if r.id in self._pos:
                    i = self._pos[r.id]
                    vec32[i] = r.vector
                    self._meta[i] = dict(r.metadata)
                    self._text[i] = r.text
                else:
                    self._pos[r.id] = len(self._ids)
                    self._ids.append(r.id)
                    self._meta.append(dict(r.metadata))
                    self._text.append(r.text)
                    vec32.append(r.vector)
            self._vec32 = np.array(vec32, dtype=np.float32).reshape(-1, self.dim)
            self._mat = self._vec32.astype(np.float64)
            self._norms = np.linalg.norm(self._mat, axis=1)
        return len(records)

    def scores(self, q, metric: Optional[str] = None) -> np.ndarray:
        """Score of every stored record against ``q``, in insertion order."""
        metric = _check_metric(metric or self.metric)
        q = np.asarray(q, dtype=np.float32).astype(np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatchError(self.dim, q.size)
        if metric == "euclidean":
            return -np.linalg.norm(self._mat - q, axis=1)
        dots = self._mat @ q
        if metric == "dot":
            return dots
        qn = np.linalg.norm(q)
        denom = self._norms * qn
        out = np.zeros_like(dots)
        np.divide(dots, denom, out=out, where=denom > 0)
        return out

    def query(self, q, k: int = 10, metric: Optional[str] = None, filter: MetadataFilter = None) -> list[QueryResult]:
        """Top ``k`` records by score; ties go to the smaller id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        scores = self.scores(q, metric)
        if not len(self):
            return []
        if filter is None:
            cand = np.arange(len(self))
        else:
            cand = np.array([i for i in range(len(self)) if _matches(self._meta[i], filter)], dtype=np.int64)
            if cand.size == 0:
                return []
        s = scores[cand]
        if cand.size > k:
            # everything strictly above the k-th best score is in; fill the rest from ties
            kth = np.partition(-s, k - 1)[k - 1]
            keep = -s <= kth
            cand, s = cand[keep], s[keep]
        ranked = sorted(zip(cand.tolist(), s.tolist()), key=lambda p: (-p[1], self._ids[p[0]]))[:k]
        return [QueryResult(self._ids[i], sc, dict(self._meta[i]), self._text[i]) for i, sc in ranked]

    def save(self, path: str | Path) -> StoreManifest:
        """Write the index to ``path``, replacing any existing index there atomically."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with self._write_lock:
            tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
            try:
                h = hashlib.sha256()
                with open(tmp / RECORDS_FILE, "w", encoding="utf-8", newline="\n") as fh:
                    for i, id in enumerate(self._ids):
                        vec = "[" + ",".join(_float32_repr(x) for x in self._vec32[i]) + "]"
                        line = (
                            '{"id": ' + json.dumps(id, ensure_ascii=False)
                            + ', "metadata": ' + json.dumps(self._meta[i], ensure_ascii=False, sort_keys=True)
                            + ', "text": ' + json.dumps(self._text[i], ensure_ascii=False)
                            + ', "vector": ' + vec + "}\n"
                        )
                        data = line.encode("utf-8")
                        h.update(data)
                        fh.write(line)
                manifest = StoreManifest(
                    INDEX_VERSION, self.dim, self.metric, len(self), self.embedder_fingerprint, h.hexdigest()
                )
                (tmp / MANIFEST_FILE).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
                _replace_dir(tmp, target)
            except BaseException:
                shutil.rmtree(tmp, ignore_errors=True)
                raise
        return manifest

    @classmethod
    def load(cls, path: str | Path) -> "VectorStore":
        root = Path(path)
        mpath = root / MANIFEST_FILE
        rpath = root / RECORDS_FILE
        if not mpath.is_file() or not rpath.is_file():
            raise IndexFormatError(f"no index at {root}")
        try:
            m = json.loads(mpath.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"corrupt index: unreadable manifest ({exc})") from exc
        if m.get("version") != INDEX_VERSION:
            raise IndexFormatError(f"unsupported index version {m.get('version')!r}")
        raw = rpath.read_bytes()
        if m.get("records_sha256") and hashlib.sha256(raw).hexdigest() != m["records_sha256"]:
            raise IndexFormatError("corrupt index: records checksum mismatch")
        store = cls(int(m["dim"]), m["metric"], m.get("embedder_fingerprint", ""))
        records = []
        try:
            for line in raw.decode("utf-8").splitlines():
                if line.strip():
                    d = json.loads(line, parse_int=float)  # keeps "-0" as -0.0
                    records.append(VectorRecord(d["id"], np.asarray(d["vector"], dtype=np.float32), d["metadata"], d["text"]))
        except (ValueError, KeyError) as exc:
            raise IndexFormatError(f"corrupt index: bad record ({exc})") from exc
        if len(records) != m.get("count") or len({r.id for r in records}) != len(records):
            raise IndexFormatError(f"corrupt index: manifest count {m.get('count')} != {len(records)} records")
        try:
            store.upsert(records)
        except DimensionMismatchError as exc:
            raise IndexFormatError(f"corrupt index: {exc}") from exc
        return store


def _replace_dir(src: Path, dst: Path) -> None:
    if dst.exists():
        backup = dst.with_name(f".{dst.name}.old-{os.getpid()}")
        os.replace(dst, backup)
        os.replace(src, dst)
        shutil.rmtree(backup, ignore_errors=True)
    else:
        os.replace(src, dst)
