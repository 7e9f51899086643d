"""Prompt assembly and chat-completion calls for preoperative instructions.

Retrieved guideline chunks go into the user message, each introduced by a
``[title, p.N]`` citation line, ahead of the clinical scenario. The system
message carries the fixed instruction template.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx

from ragline.errors import GenerationServiceError, PromptError

log = logging.getLogger(__name__)

API_KEY_ENV = "RAGLINE_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5
FAMILY_TEMPERATURE = {"gpt_like": 0.0, "llama_like": 0.1, "stub": 0.0}
ROLES = ("system", "user", "assistant")

DEFAULT_SYSTEM_TEXT = """\
You are the anaesthetist reviewing this patient at the preoperative clinic two weeks before surgery. \
Routine preoperative investigations are done and their results appear in the clinical summary.

Review the summary and write the preoperative anaesthesia instructions for your medical colleagues, \
following the department's guidelines strictly.

Cover each of these components:
1. Doctor or nurse review - state Doctor or Nurse.
2. Fasting instructions - keyed to the number of hours before the scheduled operation.
3. Suitability for preoperative carbohydrate loading - yes or no.
4. Medication instructions - each medication with what to do on the day of surgery and in the days before it.
5. Instructions for the healthcare team - e.g. blood group matching, preoperative dialysis, or a high dependency or ICU bed after surgery.
6. Preoperative optimization required - list what must be optimized.
7. Need to delay the operation for further medical workup and optimization.
8. Department protocols that apply - name each one with a short reason.

These are final instructions, so do not hedge. Do not offer optimization for conditions that are already optimized. \
Write NA for any component with nothing relevant."""

_NUMBERED = re.compile(r"^\s*(\d+)\.\s", re.MULTILINE)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class PromptTemplate:
    system_text: str = DEFAULT_SYSTEM_TEXT
    context_header: str = "Relevant department guideline excerpts:"
    user_template: str = "{context}Clinical summary:\n{scenario}"

    def __post_init__(self):
        numbers = [int(n) for n in _NUMBERED.findall(self.system_text)]
        if numbers != list(range(1, 9)):
            raise ValueError(f"system_text must number exactly 8 components 1-8, found {numbers}")
        if "{context}" not in self.user_template or "{scenario}" not in self.user_template:
            raise ValueError("user_template needs {context} and {scenario} slots")

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**{k: d[k] for k in ("system_text", "context_header", "user_template") if k in d})


@dataclass(frozen=True)
class GenerationConfig:
    model_id: str = "stub"
    family: str = "stub"
    temperature: Optional[float] = None
    max_tokens: Optional[int] = None
    mode: str = "rag"

    def __post_init__(self):
        if self.family not in FAMILY_TEMPERATURE:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.mode not in ("rag", "bare"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def effective_temperature(self) -> float:
        return FAMILY_TEMPERATURE[self.family] if self.temperature is None else float(self.temperature)

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        return cls(**{k: d[k] for k in ("model_id", "family", "temperature", "max_tokens", "mode") if k in d})


@dataclass
class GenerationRecord:
    model_id: str
    mode: str
    scenario_id: Optional[str]
    messages: list[ChatMessage]
    completion: str
    chunk_ids: list[str]
    latency_ms: float
    timestamp: str
    temperature: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["messages"] = [m.to_dict() for m in self.messages]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationRecord":
        d = dict(d)
        d["messages"] = [ChatMessage(**m) for m in d["messages"]]
        return cls(**d)


def citation(result) -> str:
    meta = result.metadata
    return f"[{meta.get('title', '')}, p.{meta.get('page_no', '?')}]"


def assemble_prompt(scenario_text: str, context=None, template: PromptTemplate = PromptTemplate(), config: GenerationConfig = GenerationConfig()) -> list[ChatMessage]:
    """System instructions plus one user message holding context (rag mode) and the scenario."""
    if not scenario_text or not scenario_text.strip():
        raise PromptError("empty scenario")
    if config.mode == "rag" and context is None:
        raise PromptError("rag mode needs a retrieved context bundle")
    if config.mode == "bare" and context is not None:
        raise PromptError("bare mode must not be given retrieved context")
    ctx = ""
    if context is not None:
        blocks = [f"{citation(r)}\n{r.text}" for r in context.results]
        ctx = template.context_header + "\n\n" + "".join(b + "\n\n" for b in blocks)
    user = template.user_template.replace("{context}", ctx).replace("{scenario}", scenario_text)
    return [ChatMessage("system", template.system_text), ChatMessage("user", user)]


def build_request(messages: Sequence[ChatMessage], config: GenerationConfig) -> dict:
    body = {"model": config.model_id, "temperature": config.effective_temperature}
    if config.max_tokens is not None:
        body["max_tokens"] = config.max_tokens
    body["messages"] = [m.to_dict() for m in messages]
    return body


class ChatProvider(Protocol):
    def complete(self, request: dict, chunk_ids: Sequence[str] = ()) -> str: ...


class StubProvider:
    """Deterministic stand-in for a chat model.

    ``echo_ids`` (the default) answers with the retrieved chunk ids, one per
    line; a fixed ``reply`` is returned verbatim instead when given. Every
    request is kept in ``requests`` for inspection.
    """

    def __init__(self, reply: Optional[str] = None):
        self.reply = reply
        self.requests: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, request: dict, chunk_ids: Sequence[str] = ()) -> str:
        with self._lock:
            self.requests.append(request)
        if self.reply is not None:
            return self.reply
        return "\n".join(chunk_ids) if chunk_ids else "NA"


class RemoteChatProvider:
    """Client for a ``/chat/completions`` endpoint; the first choice is returned."""

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        timeout: float = 120.0,
        sleep=time.sleep,
    ):
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise GenerationServiceError(f"generation service error: credentials missing (set {API_KEY_ENV})")
        self._http = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
            timeout=timeout,
        )
        self._sleep = sleep

    def close(self):
        self._http.close()

    def complete(self, request: dict, chunk_ids: Sequence[str] = ()) -> str:
        last: Optional[GenerationServiceError] = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                self._sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
            try:
                resp = self._http.post("/chat/completions", json=request)
            except httpx.TransportError as exc:
                last = GenerationServiceError(f"generation service error: {exc}")
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = GenerationServiceError(f"generation service error: HTTP {resp.status_code}", resp.status_code)
                continue
            if resp.status_code >= 400:
                raise GenerationServiceError(f"generation service error: HTTP {resp.status_code}", resp.status_code)
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise GenerationServiceError(f"generation service error: malformed response ({exc})") from exc
        raise last


def generate(
    messages: Sequence[ChatMessage],
    config: GenerationConfig,
    provider: ChatProvider,
    *,
    scenario_id: Optional[str] = None,
    context=None,
) -> GenerationRecord:
    """Send ``messages`` to ``provider`` and record the completion with its latency."""
    chunk_ids = list(context.chunk_ids) if context is not None else []
    request = build_request(messages, config)
    t0 = time.perf_counter()
    completion = provider.complete(request, chunk_ids)
    latency = (time.perf_counter() - t0) * 1000.0
    warnings = []
    if not completion.strip():
        log.warning("empty completion for scenario %s", scenario_id)
        warnings.append("empty completion")
    return GenerationRecord(
        model_id=config.model_id,
        mode=config.mode,
        scenario_id=scenario_id,
        messages=list(messages),
        completion=completion,
        chunk_ids=chunk_ids,
        latency_ms=latency,
        timestamp=datetime.now(timezone.utc).isoformat(),
        temperature=request["temperature"],
        warnings=warnings,
    )


class GenerationLog:
    """Append-only JSONL log; each record is written with a single locked write."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: GenerationRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()

    def read(self) -> list[GenerationRecord]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [GenerationRecord.from_dict(json.loads(l)) for l in fh if l.strip()]


def generate_many(jobs, config: GenerationConfig, provider: ChatProvider, log_to: Optional[GenerationLog] = None, max_workers: int = 2) -> list[GenerationRecord]:
    """Run independent ``(scenario_id, messages, context)`` jobs with bounded parallelism."""

    def run(job):
        scenario_id, messages, context = job
        rec = generate(messages, config, provider, scenario_id=scenario_id, context=context)
        if log_to is not None:
            log_to.append(rec)
        return rec

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, jobs))
