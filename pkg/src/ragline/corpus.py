"""Load a directory of guideline documents into page-addressed text.

Plain text and markdown are read natively and become a single page. PDFs
need an external extractor: anything that takes the raw file bytes and
returns the ordered page strings. :class:`CommandExtractor` wraps a shell
tool whose stdout is UTF-8 with pages separated by form feeds.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import subprocess
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from ragline.errors import CorpusError, ExtractionError

log = logging.getLogger(__name__)

MANIFEST_NAME = "corpus.manifest.json"
PAGE_BREAK = "\f"


class DocFormat(str, enum.Enum):
    PLAIN_TEXT = "plain_text"
    MARKDOWN = "markdown"
    PDF_EXTRACTED = "pdf_extracted"


SUFFIX_FORMATS = {
    ".txt": DocFormat.PLAIN_TEXT,
    ".md": DocFormat.MARKDOWN,
    ".markdown": DocFormat.MARKDOWN,
    ".pdf": DocFormat.PDF_EXTRACTED,
}

Extractor = Callable[[bytes], Sequence[str]]


@dataclass(frozen=True)
class PageText:
    page_no: int
    text: str


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    title: str
    pages: tuple[PageText, ...]
    source_path: str
    format: DocFormat
    checksum: str
    guideline_no: Optional[int] = None

    @property
    def text(self) -> str:
        return "".join(p.text for p in self.pages)


@dataclass
class CorpusScan:
    """Everything learned while scanning a corpus directory."""

    documents: list[SourceDocument]
    skipped: list[str] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)


class CommandExtractor:
    """Run an external PDF-to-text tool: bytes on stdin, form-feed separated pages on stdout."""

    def __init__(self, argv: Sequence[str], timeout: float = 120.0):
        self.argv = list(argv)
        self.timeout = timeout

    def __call__(self, data: bytes) -> list[str]:
        proc = subprocess.run(self.argv, input=data, capture_output=True, timeout=self.timeout, check=False)
        if proc.returncode != 0:
            raise ExtractionError(f"extractor {self.argv[0]!r} exited with {proc.returncode}")
        out = proc.stdout.decode("utf-8")
        pages = out.split(PAGE_BREAK)
        # a trailing form feed terminates the last page rather than opening a new one
        if len(pages) > 1 and pages[-1] == "":
            pages.pop()
        return pages


def normalize_text(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return unicodedata.normalize("NFC", text)


def content_checksum(pages: Sequence[PageText]) -> str:
    """64-bit hex digest of the concatenated page text."""
    h = hashlib.blake2b(digest_size=8)
    for page in pages:
        h.update(page.text.encode("utf-8"))
    return h.hexdigest()


def extract_text(
    data: bytes,
    format: DocFormat | str,
    extractor: Optional[Extractor] = None,
    name: str = "<bytes>",
) -> list[PageText]:
    """Turn raw document bytes into NFC-normalized, LF-terminated pages."""
    fmt = DocFormat(format)
    if not data:
        raise ExtractionError(f"empty document: {name}")
    if fmt is DocFormat.PDF_EXTRACTED:
        if extractor is None:
            raise ExtractionError(f"extractor unavailable for {name}")
        raw_pages = list(extractor(data))
        if not raw_pages:
            raise ExtractionError(f"empty document: {name}")
    else:
        try:
            raw_pages = [data.decode("utf-8-sig")]
        except UnicodeDecodeError as exc:
            raise ExtractionError(f"encoding error in {name}: {exc}") from exc
    return [PageText(i, normalize_text(t)) for i, t in enumerate(raw_pages, start=1)]


def read_manifest(path: Path) -> dict[str, dict]:
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise CorpusError(f"manifest {path} must be a JSON array")
    by_file = {}
    for entry in entries:
        if not isinstance(entry, dict) or "file" not in entry:
            raise CorpusError(f"manifest {path}: every entry needs a 'file' key")
        gno = entry.get("guideline_no")
        if gno is not None and not (isinstance(gno, int) and 1 <= gno <= 35):
            raise CorpusError(f"manifest {path}: guideline_no for {entry['file']!r} must be an integer 1-35")
        by_file[entry["file"]] = entry
    return by_file


def _load_one(path: Path, root: Path, fmt: DocFormat, meta: dict, extractor) -> SourceDocument:
    rel = path.relative_to(root).as_posix()
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ExtractionError(f"unreadable file {rel}: {exc}") from exc
    pages = extract_text(data, fmt, extractor=extractor, name=rel)
    return SourceDocument(
        doc_id=rel,
        title=meta.get("title") or path.stem,
        pages=tuple(pages),
        source_path=str(path),
        format=fmt,
        checksum=content_checksum(pages),
        guideline_no=meta.get("guideline_no"),
    )


def scan_corpus(
    dir: str | Path,
    manifest: str | Path | None = None,
    extractor: Optional[Extractor] = None,
    max_workers: int = 4,
) -> CorpusScan:
    """Load every recognized file under ``dir``, collecting per-file problems.

    Raises:
        CorpusError: if ``dir`` is missing or nothing could be loaded.
    """
    root = Path(dir)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    manifest_path = Path(manifest) if manifest is not None else root / MANIFEST_NAME
    meta = read_manifest(manifest_path) if manifest_path.is_file() else {}
    if manifest is not None and not manifest_path.is_file():
        raise CorpusError(f"manifest not found: {manifest_path}")

    jobs, skipped = [], []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root).as_posix()
        if path == manifest_path or path.name == MANIFEST_NAME:
            continue
        fmt = SUFFIX_FORMATS.get(path.suffix.lower())
        if fmt is None:
            skipped.append(rel)
            log.warning("skipping unrecognized file %s", rel)
            continue
        jobs.append((path, fmt, meta.get(rel) or meta.get(path.name) or {}))

    docs, errors = [], {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [(p, pool.submit(_load_one, p, root, fmt, m, extractor)) for p, fmt, m in jobs]
        for path, fut in futures:
            try:
                docs.append(fut.result())
            except ExtractionError as exc:
                rel = path.relative_to(root).as_posix()
                errors[rel] = str(exc)
                log.error("%s", exc)
    if not docs:
        raise CorpusError(f"empty corpus: no loadable documents in {root}", errors)
    docs.sort(key=lambda d: d.doc_id)
    return CorpusScan(docs, skipped, errors)


def load_corpus(
    dir: str | Path,
    manifest: str | Path | None = None,
    extractor: Optional[Extractor] = None,
) -> list[SourceDocument]:
    """Documents under ``dir`` sorted by doc_id. Per-file failures are logged, not raised."""
    return scan_corpus(dir, manifest, extractor).documents
