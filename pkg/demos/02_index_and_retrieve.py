"""
Index a corpus and retrieve with the hashing embedder
=====================================================

The hashing embedder needs no network, so this runs anywhere.  A planted
rare word per document makes the right answer known in advance.
"""

import tempfile
from pathlib import Path

from ragline import Embedder, EmbedderConfig, RetrievalConfig, SplitterConfig, VectorStore, build_store, load_corpus, retrieve, split_corpus
from ragline.fixtures import write_needle_corpus

work = Path(tempfile.mkdtemp())
cases = write_needle_corpus(work / "corpus", n_docs=12)

docs = load_corpus(work / "corpus")
chunks = split_corpus(docs, SplitterConfig(chunk_size=300, overlap=30))
print(len(docs), "documents ->", len(chunks), "chunks")

embedder = Embedder(EmbedderConfig(provider="hash", dim=1536))
store = build_store(chunks, embedder)
# the saved manifest carries the embedder fingerprint and a checksum of the records file
print(store.save(work / "index"))
store = VectorStore.load(work / "index")

case = cases[3]
bundle = retrieve(case["query"], store, embedder, RetrievalConfig(k=3))
for r in bundle.results:
    at = max(r.text.find(case["query"]), 0)
    print(f"{r.score:.3f}  {r.metadata['doc_id']}  {r.text[at:at + 50]!r}")
assert bundle.results[0].metadata["doc_id"] == case["relevant_doc_ids"][0]
