"""Recursive separator-based splitting of pages into overlapping chunks.

The splitter works in two passes. First the page is cut into atomic pieces
no longer than ``chunk_size`` units: split on the first separator that
occurs, keep each separator attached to the end of the piece before it,
and recurse into oversized pieces with the remaining separators. The empty
separator at the end of the list cuts into single characters. Then the
pieces are greedily merged into chunks, and each new chunk re-opens with
the longest run of trailing pieces from the previous chunk that fits inside
``overlap``.

Because separators are kept inside the pieces, every chunk is an exact
substring of the page and ``char_start``/``char_end`` index it directly.
"""

from __future__ import annotations

import enum
import json
import re
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Protocol, Sequence

DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")


class LengthFn(str, enum.Enum):
    CHARS = "chars"
    TOKENS = "tokens"


class TokenCounter(Protocol):
    fingerprint: str

    def count(self, text: str) -> int: ...


class WordPieceCounter:
    """Approximate token count: alphanumeric runs plus non-space punctuation marks.

    Subadditive: ``count(a + b) <= count(a) + count(b)``. The merge step
    relies on that to keep chunks within budget, so any substitute counter
    (a BPE tokenizer, say) should have the same property.
    """

    fingerprint = "wordpiece-v1"
    _pattern = re.compile(r"[^\W_]+|[^\w\s]|_")

    def count(self, text: str) -> int:
        return sum(1 for _ in self._pattern.finditer(text))


DEFAULT_COUNTER = WordPieceCounter()


@dataclass(frozen=True)
class SplitterConfig:
    chunk_size: int = 1000
    overlap: int = 100
    separators: tuple[str, ...] = DEFAULT_SEPARATORS
    length_fn: LengthFn = LengthFn.CHARS

    def __post_init__(self):
        object.__setattr__(self, "separators", tuple(self.separators))
        object.__setattr__(self, "length_fn", LengthFn(self.length_fn))
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")
        if not self.separators or self.separators[-1] != "":
            raise ValueError('separators must end with "" so oversized runs can be hard-split')

    @classmethod
    def from_dict(cls, d: dict) -> "SplitterConfig":
        return cls(**{k: v for k, v in d.items() if k in {"chunk_size", "overlap", "separators", "length_fn"}})


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    page_no: int
    char_start: int
    char_end: int
    text: str
    unit_len: int
    title: str = ""
    guideline_no: Optional[int] = None

    def to_json(self) -> str:
        d = asdict(self)
        keys = ("chunk_id", "doc_id", "title", "page_no", "char_start", "char_end", "unit_len", "text")
        out = {k: d[k] for k in keys}
        if self.guideline_no is not None:
            out["guideline_no"] = self.guideline_no
        return json.dumps(out, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            page_no=int(d["page_no"]),
            char_start=int(d["char_start"]),
            char_end=int(d["char_end"]),
            text=d["text"],
            unit_len=int(d["unit_len"]),
            title=d.get("title", ""),
            guideline_no=d.get("guideline_no"),
        )


def count_units(text: str, length_fn: LengthFn | str, counter: TokenCounter = DEFAULT_COUNTER) -> int:
    if LengthFn(length_fn) is LengthFn.CHARS:
        return len(text)
    return counter.count(text)


def _split_keep(text: str, sep: str) -> list[str]:
    parts = text.split(sep)
    pieces = [p + sep for p in parts[:-1]] + [parts[-1]]
    return [p for p in pieces if p]


def _atoms(text, start, seps, size, units):
    """(start, end, units) spans of pieces of ``text`` each at most ``size`` units."""
    for i, sep in enumerate(seps):
        if sep == "":
            return [(start + j, start + j + 1, units(ch)) for j, ch in enumerate(text)]
        if sep in text:
            rest = seps[i + 1 :]
            break
    else:  # pragma: no cover - config validation guarantees a trailing ""
        raise ValueError('separators must end with ""')

    out = []
    pos = start
    for piece in _split_keep(text, sep):
        n = units(piece)
        if n <= size:
            out.append((pos, pos + len(piece), n))
        else:
            out.extend(_atoms(piece, pos, rest, size, units))
        pos += len(piece)
    return out


def _merge(atoms, size, overlap):
    spans = []
    window: deque[tuple[int, int, int]] = deque()
    total = 0
    for atom in atoms:
        n = atom[2]
        if window and total + n > size:
            spans.append((window[0][0], window[-1][1]))
            # keep the longest suffix within overlap that still leaves room for this piece
            while window and (total > overlap or total + n > size):
                total -= window.popleft()[2]
        window.append(atom)
        total += n
    if window:
        spans.append((window[0][0], window[-1][1]))
    return spans


def split_page(
    text: str,
    config: SplitterConfig = SplitterConfig(),
    counter: TokenCounter = DEFAULT_COUNTER,
    *,
    doc_id: str = "",
    page_no: int = 1,
    title: str = "",
    guideline_no: Optional[int] = None,
) -> list[Chunk]:
    """Split one page into chunks whose spans cover the page exactly."""
    if not text:
        return []

    def units(s):
        return count_units(s, config.length_fn, counter)

    if units(text) <= config.chunk_size:
        spans = [(0, len(text))]
    else:
        atoms = _atoms(text, 0, config.separators, config.chunk_size, units)
        spans = _merge(atoms, config.chunk_size, config.overlap)

    return [
        Chunk(
            chunk_id=f"{doc_id}#{page_no}#{seq}",
            doc_id=doc_id,
            page_no=page_no,
            char_start=a,
            char_end=b,
            text=text[a:b],
            unit_len=units(text[a:b]),
            title=title,
            guideline_no=guideline_no,
        )
        for seq, (a, b) in enumerate(spans)
    ]


def split_document(doc, config: SplitterConfig = SplitterConfig(), counter: TokenCounter = DEFAULT_COUNTER) -> list[Chunk]:
    """Chunks for every page of a :class:`~ragline.corpus.SourceDocument`, in page order."""
    chunks = []
    for page in doc.pages:
        chunks.extend(
            split_page(
                page.text,
                config,
                counter,
                doc_id=doc.doc_id,
                page_no=page.page_no,
                title=doc.title,
                guideline_no=doc.guideline_no,
            )
        )
    return chunks


def split_corpus(docs: Iterable, config: SplitterConfig = SplitterConfig(), counter: TokenCounter = DEFAULT_COUNTER) -> list[Chunk]:
    return [c for doc in docs for c in split_document(doc, config, counter)]


def write_chunks(chunks: Sequence[Chunk], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chunks:
            fh.write(c.to_json() + "\n")


def read_chunks(path) -> list[Chunk]:
    with open(path, encoding="utf-8") as fh:
        return [Chunk.from_dict(json.loads(line)) for line in fh if line.strip()]
