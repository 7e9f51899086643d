"""Retrieval agent: embed a query, pull the top-k chunks, and score retrieval runs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ragline.chunker import Chunk
from ragline.errors import EmbedderMismatchError, RaglineError
from ragline.vector_store import METRICS, QueryResult, VectorRecord, VectorStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 10
    metric: str = "cosine"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass
class ContextBundle:
    query: str
    results: list[QueryResult]
    embedder_fingerprint: str
    empty_index: bool = False

    @property
    def chunk_ids(self) -> list[str]:
        return [r.id for r in self.results]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "embedder_fingerprint": self.embedder_fingerprint,
            "empty_index": self.empty_index,
            "results": [r.to_dict() for r in self.results],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContextBundle":
        return cls(d["query"], [QueryResult.from_dict(r) for r in d["results"]], d["embedder_fingerprint"], d.get("empty_index", False))


@dataclass(frozen=True)
class RetrievalEvalCase:
    query: str
    relevant_doc_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "relevant_doc_ids", frozenset(self.relevant_doc_ids))
        if not self.relevant_doc_ids:
            raise ValueError(f"eval case {self.query!r} has no relevant_doc_ids")


def chunk_metadata(chunk: Chunk) -> dict[str, str]:
    meta = {"doc_id": chunk.doc_id, "title": chunk.title, "page_no": str(chunk.page_no)}
    if chunk.guideline_no is not None:
        meta["guideline_no"] = str(chunk.guideline_no)
    return meta


def build_store(chunks: Sequence[Chunk], embedder, metric: str = "cosine") -> VectorStore:
    """Embed chunks and load them into a fresh store stamped with the embedder fingerprint."""
    store = VectorStore(embedder.dim, metric, embedder.fingerprint)
    if chunks:
        vectors = embedder.embed([c.text for c in chunks])
        store.upsert(
            VectorRecord(c.chunk_id, v, chunk_metadata(c), c.text) for c, v in zip(chunks, vectors)
        )
    return store


def retrieve(query: str, store: VectorStore, embedder, config: RetrievalConfig = RetrievalConfig()) -> ContextBundle:
    """Top-k chunks for ``query``, exactly as the store ranks them.

    Raises:
        EmbedderMismatchError: if the store was built with a different embedder.
    """
    if store.embedder_fingerprint != embedder.fingerprint:
        raise EmbedderMismatchError(store.embedder_fingerprint, embedder.fingerprint)
    if not len(store):
        log.warning("retrieving from an empty index")
        return ContextBundle(query, [], embedder.fingerprint, empty_index=True)
    q = embedder.embed_one(query)
    return ContextBundle(query, store.query(q, config.k, config.metric), embedder.fingerprint)


def evaluate_retrieval(
    cases: Sequence[RetrievalEvalCase],
    store: VectorStore,
    embedder,
    config: RetrievalConfig = RetrievalConfig(),
) -> dict[str, float]:
    """hit_rate_at_k, mrr and mean_top_score over ``cases``.

    A case is a hit when any of its top-k chunks comes from a relevant
    document; its reciprocal rank uses the first such chunk.
    """
    if not cases:
        raise ValueError("evaluate_retrieval needs at least one case")
    hits = rr = top = 0.0
    for case in cases:
        bundle = retrieve(case.query, store, embedder, config)
        if bundle.results:
            top += bundle.results[0].score
        for rank, res in enumerate(bundle.results, start=1):
            if res.metadata.get("doc_id") in case.relevant_doc_ids:
                hits += 1
                rr += 1.0 / rank
                break
    n = len(cases)
    return {"hit_rate_at_k": hits / n, "mrr": rr / n, "mean_top_score": top / n}


def read_eval_cases(path: str | Path) -> list[RetrievalEvalCase]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                cases.append(RetrievalEvalCase(d["query"], frozenset(d["relevant_doc_ids"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise RaglineError(f"{path}:{lineno}: bad eval case ({exc})") from exc
    if not cases:
        raise RaglineError(f"{path}: no eval cases")
    return cases
