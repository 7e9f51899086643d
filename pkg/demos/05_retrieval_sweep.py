"""
Sweeping chunk size and k
=========================

Same loop the ``ragline sweep`` command runs, written out by hand.
"""

import tempfile
from pathlib import Path

import numpy as np

from ragline import Embedder, EmbedderConfig, RetrievalConfig, SplitterConfig, build_store, evaluate_retrieval, load_corpus, split_corpus
from ragline.fixtures import write_needle_corpus
from ragline.retriever import RetrievalEvalCase

work = Path(tempfile.mkdtemp())
cases = [RetrievalEvalCase(c["query"], frozenset(c["relevant_doc_ids"])) for c in write_needle_corpus(work, n_docs=20)]
docs = load_corpus(work)
embedder = Embedder(EmbedderConfig(provider="hash"))

sizes, ks = [200, 500, 1000], [1, 3, 10]
grid = np.zeros((len(sizes), len(ks)))
for i, size in enumerate(sizes):
    store = build_store(split_corpus(docs, SplitterConfig(size, size // 10)), embedder)
    for j, k in enumerate(ks):
        grid[i, j] = evaluate_retrieval(cases, store, embedder, RetrievalConfig(k=k))["mrr"]

print("mrr by chunk size (rows) and k (columns)")
print(ks)
for size, row in zip(sizes, grid):
    print(size, np.round(row, 3))
best = np.unravel_index(np.argmax(grid), grid.shape)
print("best:", sizes[best[0]], "chars, k =", ks[best[1]])
