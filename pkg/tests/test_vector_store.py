import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import linear_scan
from ragline.errors import DimensionMismatchError, IndexFormatError
from ragline.vector_store import VectorRecord, VectorStore, similarity


def small_store():
    s = VectorStore(2, "cosine", "fp")
    s.upsert([
        VectorRecord("e1", [1, 0], {"page_no": "1"}, "one"),
        VectorRecord("e2", [0, 1], {"page_no": "2"}, "two"),
        VectorRecord("e3", [0.6, 0.8], {"page_no": "1"}, "three"),
    ])
    return s


def random_store(rng, n, dim, metric="cosine"):
    s = VectorStore(dim, metric, "fp")
    s.upsert(
        VectorRecord(f"r{i:05d}", rng.standard_normal(dim).astype(np.float32), {"page_no": str(i % 7)}, f"text {i}")
        for i in range(n)
    )
    return s


def test_upsert_counts_and_replace():
    s = VectorStore(2)
    assert s.upsert([VectorRecord(f"x{i}", [i, 1]) for i in range(3)]) == 3
    assert len(s) == 3
    s2 = VectorStore(2)
    s2.upsert([VectorRecord("a", [1, 0])])
    s2.upsert([VectorRecord("a", [0, 1], text="new")])
    assert len(s2) == 1
    assert s2.get("a").vector.tolist() == [0, 1] and s2.get("a").text == "new"


def test_upsert_rejects_wrong_dim_naming_id():
    s = VectorStore(1536)
    with pytest.raises(DimensionMismatchError, match="'short'"):
        s.upsert([VectorRecord("short", np.zeros(8))])
    assert len(s) == 0


def test_similarity_examples():
    assert similarity([1, 0], [0, 1], "cosine") == 0
    assert similarity([1, 2], [2, 4], "cosine") == pytest.approx(1.0)
    assert similarity([3, 4], [3, 4], "euclidean") == 0
    assert similarity([1, 2], [3, 4], "dot") == 11
    assert similarity([0, 0], [1, 1], "cosine") == 0
    with pytest.raises(DimensionMismatchError):
        similarity([1, 2], [1, 2, 3])


def test_query_example():
    res = small_store().query(np.array([1, 0]), k=2)
    assert [r.id for r in res] == ["e1", "e3"]
    assert res[0].score == pytest.approx(1.0) and res[1].score == pytest.approx(0.6, abs=1e-7)
    # oracle over all three records
    oracle = linear_scan([(r.id, r.vector, r.metadata) for r in small_store().records()], [1, 0], 2, "cosine")
    assert [i for i, _ in oracle] == ["e1", "e3"]


def test_query_k_larger_than_store_and_filters():
    s = small_store()
    assert [r.id for r in s.query([1, 0], k=10)] == ["e1", "e3", "e2"]
    assert s.query([1, 0], k=10, filter={"page_no": "3"}) == []
    assert [r.id for r in s.query([1, 0], k=10, filter={"page_no": "1"})] == ["e1", "e3"]
    assert [r.id for r in s.query([1, 0], k=10, filter=lambda m: m["page_no"] == "2")] == ["e2"]


def test_query_empty_store_and_bad_inputs():
    s = VectorStore(3)
    assert s.query([1, 2, 3], 5) == []
    with pytest.raises(DimensionMismatchError):
        small_store().query([1, 2, 3])
    with pytest.raises(ValueError):
        small_store().query([1, 0], k=0)


def test_ties_broken_by_ascending_id():
    s = VectorStore(2, "dot")
    s.upsert([VectorRecord(i, [1, 1]) for i in ["c", "a", "b"]] + [VectorRecord("z", [5, 5])])
    assert [r.id for r in s.query([1, 0], k=3)] == ["z", "a", "b"]


def test_zero_vector_cosine_does_not_outrank():
    s = VectorStore(2)
    s.upsert([VectorRecord("empty", [0, 0]), VectorRecord("real", [1, 1])])
    assert [r.id for r in s.query([1, 0.5], k=2)] == ["real", "empty"]
    assert s.query([0, 0], k=2)[0].score == 0


@pytest.mark.parametrize("metric", ["cosine", "euclidean", "dot"])
def test_oracle_equivalence_small(metric):
    rng = np.random.default_rng(3)
    s = random_store(rng, 300, 16, metric)
    recs = [(r.id, r.vector, r.metadata) for r in s.records()]
    for _ in range(20):
        q = rng.standard_normal(16).astype(np.float32)
        got = [(r.id, r.score) for r in s.query(q, 10)]
        want = linear_scan(recs, q, 10, metric)
        assert [g[0] for g in got] == [w[0] for w in want]
        assert np.allclose([g[1] for g in got], [w[1] for w in want], atol=1e-9)
        flt = {"page_no": "3"}
        got = [r.id for r in s.query(q, 5, filter=flt)]
        assert got == [w[0] for w in linear_scan(recs, q, 5, metric, flt)]


def test_scaling_query_keeps_rank():
    rng = np.random.default_rng(5)
    s = random_store(rng, 200, 12)
    q = rng.standard_normal(12).astype(np.float32)
    for metric in ("cosine", "dot"):
        base = [r.id for r in s.query(q, 20, metric)]
        assert [r.id for r in s.query(q * np.float32(4.0), 20, metric)] == base
    assert np.allclose(s.scores(q, "cosine"), s.scores(q * np.float32(4.0), "cosine"))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, (6, 5), elements=st.floats(-10, 10, width=32)), arrays(np.float32, 5, elements=st.floats(-10, 10, width=32)))
def test_cosine_bounded(mat, q):
    s = VectorStore(5)
    s.upsert(VectorRecord(str(i), v) for i, v in enumerate(mat))
    sc = s.scores(q, "cosine")
    assert np.all(sc <= 1 + 1e-6) and np.all(sc >= -1 - 1e-6)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    s = random_store(rng, 100, 24, "euclidean")
    s.upsert([VectorRecord("odd", np.array([1e-8, 3.4028235e38, -0.0] + [0.1] * 21, dtype=np.float32), {"title": "Tëst"}, "naïve\ntext")])
    s.save(tmp_path / "idx")
    t = VectorStore.load(tmp_path / "idx")
    assert t.manifest == s.manifest
    for a, b in zip(s.records(), t.records()):
        assert (a.id, a.metadata, a.text) == (b.id, b.metadata, b.text)
        assert a.vector.tobytes() == b.vector.tobytes()
    for _ in range(20):
        q = rng.standard_normal(24).astype(np.float32)
        assert s.query(q, 10) == t.query(q, 10)


def test_save_replaces_existing_index(tmp_path):
    a = small_store()
    a.save(tmp_path / "idx")
    b = VectorStore(2, "dot", "other")
    b.upsert([VectorRecord("only", [1, 1])])
    b.save(tmp_path / "idx")
    t = VectorStore.load(tmp_path / "idx")
    assert t.ids() == ["only"] and t.metric == "dot"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["idx"]


def test_load_missing(tmp_path):
    with pytest.raises(IndexFormatError):
        VectorStore.load(tmp_path / "nope")


def test_load_count_mismatch_is_corrupt(tmp_path):
    small_store().save(tmp_path / "idx")
    m = json.loads((tmp_path / "idx" / "manifest.json").read_text())
    m["count"] = 5
    (tmp_path / "idx" / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(IndexFormatError, match="corrupt index"):
        VectorStore.load(tmp_path / "idx")


def test_load_tampered_records_is_corrupt(tmp_path):
    small_store().save(tmp_path / "idx")
    p = tmp_path / "idx" / "records.jsonl"
    p.write_text(p.read_text().replace('"one"', '"uno"'))
    with pytest.raises(IndexFormatError, match="corrupt index"):
        VectorStore.load(tmp_path / "idx")


def test_load_unsupported_version(tmp_path):
    small_store().save(tmp_path / "idx")
    m = json.loads((tmp_path / "idx" / "manifest.json").read_text())
    m["version"] = 99
    (tmp_path / "idx" / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(IndexFormatError, match="unsupported index version"):
        VectorStore.load(tmp_path / "idx")
