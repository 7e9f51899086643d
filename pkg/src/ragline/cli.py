"""Command-line entry point: ``ragline ingest|index|query|ask|score|sweep``.

Exit codes: 0 success, 1 input or config error, 2 index/embedder mismatch,
3 embedding or generation provider failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from pathlib import Path
from typing import Optional, Sequence

from filelock import FileLock, Timeout

from ragline.chunker import SplitterConfig, read_chunks, split_corpus, write_chunks
from ragline.config import PipelineConfig
from ragline.corpus import CommandExtractor, scan_corpus
from ragline.embedder import Embedder, EmbedderConfig, RemoteEmbeddingClient
from ragline.errors import (
    EmbedderMismatchError,
    EmbeddingServiceError,
    GenerationServiceError,
    RaglineError,
)
from ragline.evaluator import accuracy_table, accuracy_tsv, compare_models, comparison_tsv, read_grades_csv, score_report
from ragline.generator import (
    GenerationConfig,
    GenerationLog,
    RemoteChatProvider,
    StubProvider,
    assemble_prompt,
    citation,
    generate,
)
from ragline.retriever import RetrievalConfig, build_store, evaluate_retrieval, read_eval_cases, retrieve
from ragline.vector_store import VectorStore

log = logging.getLogger("ragline")

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH, EXIT_PROVIDER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _int_list(s: str) -> list[int]:
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ragline", description="Build and query a guideline index, generate instructions, score graded answers.")
    p.add_argument("-c", "--config", type=Path, help="pipeline config JSON file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, corpus=False, index=False, embed=False):
        if corpus:
            sp.add_argument("--corpus", type=Path, dest="corpus_dir")
            sp.add_argument("--manifest", type=Path)
            sp.add_argument("--pdf-extractor", help="command that reads a PDF on stdin and writes form-feed separated pages")
            sp.add_argument("--chunk-size", type=int)
            sp.add_argument("--overlap", type=int)
            sp.add_argument("--length-fn", choices=["chars", "tokens"])
        if index:
            sp.add_argument("--index", type=Path, dest="index_dir")
        if embed:
            sp.add_argument("--embedder", choices=["hash", "remote"], dest="embed_provider")
            sp.add_argument("--dim", type=int)
            sp.add_argument("--embed-model")
        sp.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    sp = sub.add_parser("ingest", help="load and chunk the corpus")
    common(sp, corpus=True)
    sp.add_argument("--out", type=Path, dest="chunks_path")

    sp = sub.add_parser("index", help="embed chunks and write the vector index")
    common(sp, corpus=True, index=True, embed=True)
    sp.add_argument("--chunks", type=Path, dest="chunks_path")
    sp.add_argument("--metric", choices=["cosine", "euclidean", "dot"])

    sp = sub.add_parser("query", help="retrieve top-k chunks for a query")
    common(sp, index=True, embed=True)
    sp.add_argument("query_text")
    sp.add_argument("--k", type=int)

    sp = sub.add_parser("ask", help="generate preoperative instructions for a scenario")
    common(sp, index=True, embed=True)
    sp.add_argument("scenario_file", type=Path)
    sp.add_argument("--mode", choices=["rag", "bare"])
    sp.add_argument("--provider", choices=["stub", "remote"], default="stub")
    sp.add_argument("--model")
    sp.add_argument("--family", choices=["gpt_like", "llama_like", "stub"])
    sp.add_argument("--temperature", type=float)
    sp.add_argument("--k", type=int)
    sp.add_argument("--scenario-id")
    sp.add_argument("--log", type=Path, dest="log_path")

    sp = sub.add_parser("score", help="accuracy and comparison reports from a grades CSV")
    sp.add_argument("grades_csv", type=Path)
    sp.add_argument("--compare", nargs=2, metavar=("MODEL_A", "MODEL_B"))
    sp.add_argument("--no-yates", action="store_true", help="plain Pearson chi-square")
    sp.add_argument("--out-dir", type=Path, help="write accuracy.tsv, comparison.tsv and report.json here")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("sweep", help="retrieval metrics over a chunk_size x k grid")
    common(sp, corpus=True, embed=True)
    sp.add_argument("--chunk-sizes", type=_int_list, required=True)
    sp.add_argument("--k", type=_int_list, required=True, dest="ks")
    sp.add_argument("--eval", type=Path, required=True, dest="eval_cases")
    return p


def _resolve(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    cfg = cfg.with_overrides(
        corpus_dir=getattr(args, "corpus_dir", None),
        manifest=getattr(args, "manifest", None),
        index_dir=getattr(args, "index_dir", None),
        chunks_path=getattr(args, "chunks_path", None),
        log_path=getattr(args, "log_path", None),
    )
    s = cfg.splitter
    split_kw = {
        "chunk_size": getattr(args, "chunk_size", None),
        "overlap": getattr(args, "overlap", None),
        "length_fn": getattr(args, "length_fn", None),
    }
    if any(v is not None for v in split_kw.values()):
        s = SplitterConfig(
            chunk_size=split_kw["chunk_size"] or s.chunk_size,
            overlap=s.overlap if split_kw["overlap"] is None else split_kw["overlap"],
            separators=s.separators,
            length_fn=split_kw["length_fn"] or s.length_fn,
        )
    e = cfg.embedder
    emb_kw = {"provider": getattr(args, "embed_provider", None), "dim": getattr(args, "dim", None), "model_id": getattr(args, "embed_model", None)}
    if any(v is not None for v in emb_kw.values()):
        e = EmbedderConfig(
            provider=emb_kw["provider"] or e.provider,
            model_id=emb_kw["model_id"] or e.model_id,
            dim=e.dim if emb_kw["dim"] is None else emb_kw["dim"],
            normalize=e.normalize,
            seed=e.seed,
        )
    r = cfg.retrieval
    k = getattr(args, "k", None)
    metric = getattr(args, "metric", None)
    if k is not None or metric is not None:
        r = RetrievalConfig(k=r.k if k is None else k, metric=metric or r.metric)
    g = cfg.generation
    gen_kw = {
        "model_id": getattr(args, "model", None),
        "family": getattr(args, "family", None),
        "temperature": getattr(args, "temperature", None),
        "mode": getattr(args, "mode", None),
    }
    if any(v is not None for v in gen_kw.values()):
        g = GenerationConfig(
            model_id=gen_kw["model_id"] or g.model_id,
            family=gen_kw["family"] or g.family,
            temperature=g.temperature if gen_kw["temperature"] is None else gen_kw["temperature"],
            max_tokens=g.max_tokens,
            mode=gen_kw["mode"] or g.mode,
        )
    return cfg.with_overrides(splitter=s, embedder=e, retrieval=r, generation=g)


def _embedder(cfg: PipelineConfig) -> Embedder:
    client = RemoteEmbeddingClient(cfg.embedding_base_url) if cfg.embedder.provider == "remote" else None
    return Embedder(cfg.embedder, client=client)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


def _load_chunks_from_corpus(cfg: PipelineConfig, pdf_extractor=None):
    if cfg.corpus_dir is None:
        raise RaglineError("no corpus directory given (--corpus or corpus_dir in config)")
    extractor = CommandExtractor(pdf_extractor.split()) if pdf_extractor else None
    scan = scan_corpus(cfg.corpus_dir, cfg.manifest, extractor)
    for name, err in scan.errors.items():
        print(f"error: {name}: {err}", file=sys.stderr)
    for name in scan.skipped:
        print(f"skipped: {name}", file=sys.stderr)
    return scan, split_corpus(scan.documents, cfg.splitter)


def _histogram(values, size, bins=5):
    width = max(1, -(-size // bins))
    counts = [0] * bins
    for v in values:
        counts[min(v // width, bins - 1)] += 1
    return [{"lo": i * width, "hi": min((i + 1) * width, size), "count": c} for i, c in enumerate(counts)]


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    scan, chunks = _load_chunks_from_corpus(cfg, args.pdf_extractor)
    cfg.chunks_path.parent.mkdir(parents=True, exist_ok=True)
    write_chunks(chunks, cfg.chunks_path)
    lens = [c.unit_len for c in chunks]
    summary = {
        "docs": len(scan.documents),
        "pages": sum(len(d.pages) for d in scan.documents),
        "chunks": len(chunks),
        "chunks_path": str(cfg.chunks_path),
        "unit": cfg.splitter.length_fn.value,
        "unit_len": {
            "min": min(lens, default=0),
            "median": statistics.median(lens) if lens else 0,
            "max": max(lens, default=0),
            "histogram": _histogram(lens, cfg.splitter.chunk_size),
        },
        "skipped": scan.skipped,
        "errors": scan.errors,
    }
    if args.json:
        _emit(summary)
    else:
        print(f"{summary['docs']} docs, {summary['pages']} pages, {summary['chunks']} chunks -> {cfg.chunks_path}")
        for b in summary["unit_len"]["histogram"]:
            print(f"  {b['lo']:>6}-{b['hi']:<6} {b['count']}")
    return EXIT_OK


def cmd_index(args, cfg: PipelineConfig) -> int:
    if args.chunks_path is not None or (cfg.corpus_dir is None and cfg.chunks_path.is_file()):
        chunks = read_chunks(cfg.chunks_path)
    else:
        _, chunks = _load_chunks_from_corpus(cfg, args.pdf_extractor)
    embedder = _embedder(cfg)
    store = build_store(chunks, embedder, cfg.retrieval.metric)
    cfg.index_dir.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(cfg.index_dir) + ".lock", timeout=0)
    try:
        with lock:
            manifest = store.save(cfg.index_dir)
    except Timeout:
        raise RaglineError(f"index {cfg.index_dir} is locked by another process")
    if args.json:
        _emit({"index_dir": str(cfg.index_dir), "manifest": manifest.to_dict()})
    else:
        print(f"indexed {manifest.count} chunks (dim {manifest.dim}, {manifest.metric}) -> {cfg.index_dir}")
    return EXIT_OK


def _open_index(cfg: PipelineConfig) -> VectorStore:
    return VectorStore.load(cfg.index_dir)


def cmd_query(args, cfg: PipelineConfig) -> int:
    store = _open_index(cfg)
    bundle = retrieve(args.query_text, store, _embedder(cfg), cfg.retrieval)
    if args.json:
        _emit(bundle.to_dict())
    else:
        for rank, r in enumerate(bundle.results, start=1):
            print(f"{rank}\t{r.score:.4f}\t{citation(r)}\t{r.id}")
    return EXIT_OK


def cmd_ask(args, cfg: PipelineConfig) -> int:
    try:
        scenario = args.scenario_file.read_text(encoding="utf-8")
    except OSError as exc:
        raise RaglineError(f"cannot read scenario file: {exc}")
    if not scenario.strip():
        raise RaglineError(f"empty scenario file {args.scenario_file}")
    gen = cfg.generation
    if args.provider == "remote" and gen.family == "stub":
        raise RaglineError("remote provider needs a model family (--family gpt_like|llama_like)")
    if args.provider == "stub" and args.family is None:
        gen = GenerationConfig("stub", "stub", gen.temperature, gen.max_tokens, gen.mode)
    bundle = None
    if gen.mode == "rag":
        bundle = retrieve(scenario, _open_index(cfg), _embedder(cfg), cfg.retrieval)
    messages = assemble_prompt(scenario, bundle, cfg.prompt_template(), gen)
    provider = RemoteChatProvider(cfg.chat_base_url) if args.provider == "remote" else StubProvider()
    record = generate(messages, gen, provider, scenario_id=args.scenario_id or args.scenario_file.stem, context=bundle)
    GenerationLog(cfg.log_path).append(record)
    if args.json:
        _emit(record.to_dict())
    else:
        print(record.completion)
    return EXIT_OK


def cmd_score(args) -> int:
    grades = read_grades_csv(args.grades_csv)
    yates = not args.no_yates
    table = accuracy_table(grades)
    acc = accuracy_tsv(table)
    cmp_text = None
    if args.compare:
        a, b = args.compare
        cmp_text = comparison_tsv(compare_models(grades, a, b, yates), a, b)
    report = score_report(grades, tuple(args.compare) if args.compare else None, yates)
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "accuracy.tsv").write_text(acc, encoding="utf-8")
        if cmp_text:
            (args.out_dir / "comparison.tsv").write_text(cmp_text, encoding="utf-8")
        (args.out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if args.json:
        _emit(report)
    else:
        sys.stdout.write(acc)
        if cmp_text:
            sys.stdout.write("\n" + cmp_text)
    return EXIT_OK


def cmd_sweep(args, cfg: PipelineConfig) -> int:
    if not args.chunk_sizes or not args.ks:
        raise RaglineError("empty sweep grid")
    cases = read_eval_cases(args.eval_cases)
    if cfg.corpus_dir is None:
        raise RaglineError("no corpus directory given (--corpus or corpus_dir in config)")
    extractor = CommandExtractor(args.pdf_extractor.split()) if args.pdf_extractor else None
    docs = scan_corpus(cfg.corpus_dir, cfg.manifest, extractor).documents
    embedder = _embedder(cfg)
    rows = []
    for size in args.chunk_sizes:
        splitter = SplitterConfig(size, min(cfg.splitter.overlap, size - 1), cfg.splitter.separators, cfg.splitter.length_fn)
        store = build_store(split_corpus(docs, splitter), embedder, cfg.retrieval.metric)
        for k in args.ks:
            m = evaluate_retrieval(cases, store, embedder, RetrievalConfig(k, cfg.retrieval.metric))
            rows.append({"chunk_size": size, "k": k, "chunks": len(store), **m, "best": False})
    best = max(range(len(rows)), key=lambda i: (rows[i]["hit_rate_at_k"], rows[i]["mrr"], -i))
    rows[best]["best"] = True
    if args.json:
        _emit({"metric": "hit_rate_at_k", "rows": rows})
    else:
        print("chunk_size\tk\thit_rate@k\tmrr\tmean_top_score\tbest")
        for r in rows:
            print(f"{r['chunk_size']}\t{r['k']}\t{r['hit_rate_at_k']:.3f}\t{r['mrr']:.3f}\t{r['mean_top_score']:.3f}\t{'*' if r['best'] else ''}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "score":
            return cmd_score(args)
        cfg = _resolve(args)
        handler = {
            "ingest": cmd_ingest,
            "index": cmd_index,
            "query": cmd_query,
            "ask": cmd_ask,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(args, cfg)
    except EmbedderMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (EmbeddingServiceError, GenerationServiceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (RaglineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
