"""ragline: a small, verifiable retrieval-augmented generation pipeline.

Ingest guideline documents, split them into overlapping chunks, embed and
index them in an exact vector store, retrieve context for clinical
scenarios, assemble prompts for a chat model, and score graded answers.
"""

from ragline.chunker import Chunk, SplitterConfig, WordPieceCounter, count_units, split_corpus, split_document, split_page
from ragline.corpus import PageText, SourceDocument, extract_text, load_corpus
from ragline.embedder import Embedder, EmbedderConfig, embed_batch, hash_embed
from ragline.errors import RaglineError
from ragline.evaluator import (
    Category,
    Grade,
    GradedItem,
    accuracy_table,
    chi_square_2x2,
    cohens_h,
    cohens_h_ci,
    compare_models,
    hallucination_rate,
)
from ragline.generator import GenerationConfig, GenerationLog, PromptTemplate, StubProvider, assemble_prompt, generate
from ragline.retriever import ContextBundle, RetrievalConfig, build_store, evaluate_retrieval, retrieve
from ragline.vector_store import VectorRecord, VectorStore, similarity

__version__ = "0.1.0"

__all__ = [
    "Category",
    "Chunk",
    "ContextBundle",
    "Embedder",
    "EmbedderConfig",
    "GenerationConfig",
    "GenerationLog",
    "Grade",
    "GradedItem",
    "PageText",
    "PromptTemplate",
    "RaglineError",
    "RetrievalConfig",
    "SourceDocument",
    "SplitterConfig",
    "StubProvider",
    "VectorRecord",
    "VectorStore",
    "WordPieceCounter",
    "accuracy_table",
    "assemble_prompt",
    "build_store",
    "chi_square_2x2",
    "cohens_h",
    "cohens_h_ci",
    "compare_models",
    "count_units",
    "embed_batch",
    "evaluate_retrieval",
    "extract_text",
    "generate",
    "hallucination_rate",
    "hash_embed",
    "load_corpus",
    "retrieve",
    "similarity",
    "split_corpus",
    "split_document",
    "split_page",
]
