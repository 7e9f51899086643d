"""Pipeline configuration: one JSON file, overridable from the command line.

Recognized keys::

    {
      "corpus_dir": "guidelines/",
      "manifest": null,
      "chunks_path": "build/chunks.jsonl",
      "index_dir": "build/index",
      "template": null,
      "log_path": "build/generations.jsonl",
      "embedding_base_url": "https://api.openai.com/v1",
      "chat_base_url": "https://api.openai.com/v1",
      "splitter":   {"chunk_size": 1000, "overlap": 100, "length_fn": "chars"},
      "embedder":   {"provider": "hash", "model_id": "text-embedding-ada-002", "dim": 1536, "normalize": true, "seed": 0},
      "retrieval":  {"k": 10, "metric": "cosine"},
      "generation": {"model_id": "gpt-4", "family": "gpt_like", "temperature": null, "max_tokens": null, "mode": "rag"}
    }

API keys are never read from here; see ``RAGLINE_API_KEY``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ragline.chunker import SplitterConfig
from ragline.embedder import DEFAULT_BASE_URL, EmbedderConfig
from ragline.errors import RaglineError
from ragline.generator import GenerationConfig, PromptTemplate
from ragline.retriever import RetrievalConfig

_KNOWN = {
    "corpus_dir", "manifest", "chunks_path", "index_dir", "template", "log_path",
    "embedding_base_url", "chat_base_url", "splitter", "embedder", "retrieval", "generation",
}
_SECRET_HINTS = ("api_key", "apikey", "access_token", "auth_token", "secret", "password")


class ConfigError(RaglineError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: Optional[Path] = None
    manifest: Optional[Path] = None
    chunks_path: Path = Path("chunks.jsonl")
    index_dir: Path = Path("index")
    template: Optional[Path] = None
    log_path: Path = Path("generations.jsonl")
    embedding_base_url: str = DEFAULT_BASE_URL
    chat_base_url: str = DEFAULT_BASE_URL
    splitter: SplitterConfig = field(default_factory=SplitterConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "PipelineConfig":
        _reject_secrets(d)
        unknown = set(d) - _KNOWN
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def path(key):
            v = d.get(key)
            return None if v is None else (base / v)

        kw = {}
        for key in ("corpus_dir", "manifest", "chunks_path", "index_dir", "template", "log_path"):
            if d.get(key) is not None:
                kw[key] = path(key)
        for key in ("embedding_base_url", "chat_base_url"):
            if key in d:
                kw[key] = d[key]
        try:
            if "splitter" in d:
                kw["splitter"] = SplitterConfig.from_dict(d["splitter"])
            if "embedder" in d:
                kw["embedder"] = EmbedderConfig.from_dict(d["embedder"])
            if "retrieval" in d:
                kw["retrieval"] = RetrievalConfig(**d["retrieval"])
            if "generation" in d:
                kw["generation"] = GenerationConfig.from_dict(d["generation"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        p = Path(path)
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"config {p} must be a JSON object")
        return cls.from_dict(d, base=p.parent)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def prompt_template(self) -> PromptTemplate:
        if self.template is None:
            return PromptTemplate()
        try:
            return PromptTemplate.from_file(self.template)
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad prompt template {self.template}: {exc}") from exc


def _reject_secrets(d, prefix=""):
    for k, v in d.items():
        if any(h in k.lower() for h in _SECRET_HINTS):
            raise ConfigError(f"config key {prefix}{k!r} looks like a secret; use the RAGLINE_API_KEY environment variable")
        if isinstance(v, dict):
            _reject_secrets(v, f"{prefix}{k}.")
