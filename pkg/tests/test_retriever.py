import logging

import pytest

from oracles import linear_scan
from ragline.chunker import Chunk, SplitterConfig, split_corpus
from ragline.corpus import load_corpus
from ragline.embedder import Embedder, EmbedderConfig
from ragline.errors import EmbedderMismatchError
from ragline.retriever import (
    ContextBundle,
    RetrievalConfig,
    RetrievalEvalCase,
    build_store,
    evaluate_retrieval,
    read_eval_cases,
    retrieve,
)

EMB = Embedder(EmbedderConfig(provider="hash", dim=512))


def chunk(i, text, doc="d.txt", page=1):
    return Chunk(f"{doc}#{page}#{i}", doc, page, 0, len(text), text, len(text), title=doc)


@pytest.fixture
def needle_store(needle_corpus):
    corpus, cases, cases_path = needle_corpus
    chunks = split_corpus(load_corpus(corpus), SplitterConfig(200, 20))
    return build_store(chunks, EMB), chunks, cases_path


def test_needle_ranks_first_and_matches_oracle(needle_store):
    store, chunks, cases_path = needle_store
    cases = read_eval_cases(cases_path)
    recs = [(r.id, r.vector, r.metadata) for r in store.records()]
    for case in cases:
        bundle = retrieve(case.query, store, EMB, RetrievalConfig(k=10))
        assert len(bundle.results) == 10
        top = bundle.results[0]
        assert top.metadata["doc_id"] in case.relevant_doc_ids
        assert case.query in top.text
        want = linear_scan(recs, EMB.embed_one(case.query), 10, "cosine")
        assert bundle.chunk_ids == [w[0] for w in want]
        assert [r.score for r in bundle.results] == pytest.approx([w[1] for w in want], abs=1e-9)


def test_k_larger_than_store():
    store = build_store([chunk(i, t) for i, t in enumerate(["alpha beta", "gamma delta", "beta gamma"])], EMB)
    assert len(retrieve("beta", store, EMB, RetrievalConfig(k=10)).results) == 3


def test_retrieve_is_store_query(needle_store):
    store, _, _ = needle_store
    bundle = retrieve("ward theatre consent", store, EMB, RetrievalConfig(k=7, metric="dot"))
    direct = store.query(EMB.embed_one("ward theatre consent"), 7, "dot")
    assert bundle.results == direct
    assert retrieve("ward theatre consent", store, EMB, RetrievalConfig(k=7, metric="dot")).results == direct


def test_fingerprint_mismatch():
    store = build_store([chunk(0, "alpha")], EMB)
    other = Embedder(EmbedderConfig(provider="hash", dim=512, seed=3))
    with pytest.raises(EmbedderMismatchError) as exc:
        retrieve("alpha", store, other)
    assert store.embedder_fingerprint in str(exc.value)


def test_empty_store_flags_warning(caplog):
    store = build_store([], EMB)
    with caplog.at_level(logging.WARNING):
        bundle = retrieve("anything", store, EMB)
    assert bundle.results == [] and bundle.empty_index
    assert "empty index" in caplog.text


def test_bundle_round_trip(needle_store):
    store, _, _ = needle_store
    b = retrieve("review", store, EMB)
    assert ContextBundle.from_dict(b.to_dict()) == b


def test_eval_metrics_on_needles(needle_store):
    store, _, cases_path = needle_store
    m = evaluate_retrieval(read_eval_cases(cases_path), store, EMB, RetrievalConfig(k=10))
    assert m["hit_rate_at_k"] == 1.0 and m["mrr"] == 1.0
    assert 0 < m["mean_top_score"] <= 1


def test_eval_absent_doc_scores_zero(needle_store):
    store, _, _ = needle_store
    m = evaluate_retrieval([RetrievalEvalCase("zorzorzorex", frozenset({"missing.txt"}))], store, EMB)
    assert m["hit_rate_at_k"] == 0 and m["mrr"] == 0


def test_eval_mrr_half_at_rank_two():
    chunks = [chunk(0, "sodium sodium sodium", doc="a.txt"), chunk(0, "sodium potassium", doc="b.txt"), chunk(0, "calcium", doc="c.txt")]
    store = build_store(chunks, EMB)
    assert retrieve("sodium", store, EMB).results[1].metadata["doc_id"] == "b.txt"
    m = evaluate_retrieval([RetrievalEvalCase("sodium", frozenset({"b.txt"}))], store, EMB, RetrievalConfig(k=3))
    assert m["hit_rate_at_k"] == 1 and m["mrr"] == pytest.approx(0.5)


def test_hit_rate_monotone_in_k(needle_store):
    store, _, _ = needle_store
    cases = [RetrievalEvalCase(q, frozenset({f"needle-{i:02d}.txt"})) for i, q in enumerate(["rule review", "dose morning", "give only after", "monitor"])]
    prev = -1
    for k in (1, 3, 5, 10):
        m = evaluate_retrieval(cases, store, EMB, RetrievalConfig(k=k))
        assert 0 <= m["mrr"] <= m["hit_rate_at_k"] <= 1
        assert m["hit_rate_at_k"] >= prev
        prev = m["hit_rate_at_k"]


def test_eval_case_validation(tmp_path):
    with pytest.raises(ValueError):
        RetrievalEvalCase("q", frozenset())
    p = tmp_path / "bad.jsonl"
    p.write_text('{"query": "a", "relevant_doc_ids": ["x"]}\n{"query": "b"}\n')
    with pytest.raises(Exception, match=":2:"):
        read_eval_cases(p)
    with pytest.raises(ValueError):
        RetrievalConfig(k=0)
