"""
Prompt assembly and a stub generation round
===========================================

The stub provider echoes the retrieved chunk ids, which makes it easy to
see what the model would have been shown.
"""

import tempfile
from pathlib import Path

from ragline import (
    Embedder,
    EmbedderConfig,
    GenerationConfig,
    GenerationLog,
    SplitterConfig,
    StubProvider,
    assemble_prompt,
    build_store,
    generate,
    load_corpus,
    retrieve,
    split_corpus,
)
from ragline.fixtures import write_guideline_corpus

work = Path(tempfile.mkdtemp())
write_guideline_corpus(work / "guidelines")
embedder = Embedder(EmbedderConfig(provider="hash"))
store = build_store(split_corpus(load_corpus(work / "guidelines"), SplitterConfig()), embedder)

scenario = (
    "72-year-old man for elective total knee replacement. "
    "Type 2 diabetes on metformin and gliclazide, HbA1c 8.9%. "
    "On apixaban for atrial fibrillation. Creatinine 160."
)

bundle = retrieve(scenario, store, embedder)
messages = assemble_prompt(scenario, bundle)
print(messages[1].content[:600], "...\n")

record = generate(messages, GenerationConfig(), StubProvider(), scenario_id="knee-01", context=bundle)
print("chunk ids sent:", record.chunk_ids[:3], "...", len(record.chunk_ids))
print("temperature:", record.temperature)

log = GenerationLog(work / "generations.jsonl")
log.append(record)
print("logged:", len(log.read()), "record(s) at", log.path)

# without retrieval the user message is just the scenario
bare = assemble_prompt(scenario, None, config=GenerationConfig(mode="bare"))
print(bare[1].content)
