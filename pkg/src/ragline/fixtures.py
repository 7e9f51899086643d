"""Synthetic data for demos and tests.

* :func:`reported_grades` expands the published per-category counts into one
  graded item per (model, scenario, replicate, category).
* :func:`write_guideline_corpus` writes 35 synthetic guideline documents
  titled after the hospital guideline list, with a manifest.
* :func:`write_needle_corpus` plants one rare term per document so
  retrieval quality has a known right answer.
"""

from __future__ import annotations

import json
import random
import re
from importlib import resources
from pathlib import Path

from ragline.corpus import MANIFEST_NAME
from ragline.evaluator import N_SCENARIOS, Category, Grade, GradedItem, reported_values

_FILLER = (
    "patient assessment review clinic surgery anaesthesia team plan record history "
    "dose morning evening ward theatre consent referral chart baseline monitor "
    "nurse doctor schedule admission discharge protocol pathway optional routine"
).split()

_NEEDLE_SYLLABLES = ("zor", "vek", "quil", "thra", "myx", "plo", "drin", "gash", "fep", "urk", "sny", "bav")


def guideline_titles() -> list[str]:
    return json.loads(resources.files("ragline.data").joinpath("guideline_titles.json").read_text(encoding="utf-8"))


def reported_grades(models=None) -> list[GradedItem]:
    """Graded items reproducing the published correct and hallucination counts.

    A 56-item category is 14 scenarios x 4 replicates; a 14-item category is
    one replicate. Within a category the first ``correct`` items (by scenario,
    then replicate) are correct and the rest wrong. Hallucinations are then
    assigned to wrong items, rotating across categories.
    """
    ref = reported_values()["accuracy"]
    cats = [Category(c) for c in ref["categories"]]
    out = []
    for model, row in ref["models"].items():
        if models is not None and model not in models:
            continue
        reps = row["per_category_n"] // N_SCENARIOS
        grid = {}
        for cat, correct in zip(cats, row["correct"]):
            keys = [(s, r) for s in range(1, N_SCENARIOS + 1) for r in range(1, reps + 1)]
            grid[cat] = [[k, Grade.CORRECT if i < correct else Grade.WRONG] for i, k in enumerate(keys)]
        remaining = row["hallucinations"][0] if row["hallucinations"] else 0
        cursor = {cat: row["correct"][i] for i, cat in enumerate(cats)}
        while remaining:
            progressed = False
            for cat in cats:
                if remaining and cursor[cat] < len(grid[cat]):
                    grid[cat][cursor[cat]][1] = Grade.HALLUCINATION
                    cursor[cat] += 1
                    remaining -= 1
                    progressed = True
            if not progressed:
                raise ValueError(f"{model}: more hallucinations than wrong answers")
        for cat in cats:
            for (scenario, rep), grade in grid[cat]:
                out.append(GradedItem(model, scenario, rep, cat, grade))
    return out


def _slug(title: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")[:48]


def _paragraphs(rng: random.Random, n: int, words=(40, 90)) -> list[str]:
    paras = []
    for _ in range(n):
        k = rng.randint(*words)
        paras.append(" ".join(rng.choice(_FILLER) for _ in range(k)).capitalize() + ".")
    return paras


def write_guideline_corpus(dir: str | Path, seed: int = 7, paragraphs: int = 12) -> list[str]:
    """Write 35 synthetic guideline files plus ``corpus.manifest.json``; return the filenames."""
    root = Path(dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    manifest, names = [], []
    for no, title in enumerate(guideline_titles(), start=1):
        name = f"g{no:02d}-{_slug(title)}.md"
        body = f"# {title}\n\n" + "\n\n".join(_paragraphs(rng, paragraphs)) + "\n"
        (root / name).write_text(body, encoding="utf-8")
        manifest.append({"file": name, "title": title, "guideline_no": no})
        names.append(name)
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return names


def needle_word(i: int) -> str:
    n = len(_NEEDLE_SYLLABLES)
    a, rest = divmod(i, n * n)
    b, c = divmod(rest, n)
    return _NEEDLE_SYLLABLES[a % n] + _NEEDLE_SYLLABLES[b] + _NEEDLE_SYLLABLES[c] + "ex"


def write_needle_corpus(dir: str | Path, n_docs: int = 12, seed: int = 11, paragraphs: int = 4) -> list[dict]:
    """Write documents that each hide one unique term; return eval cases for them.

    Every document is filler text from a shared vocabulary plus one paragraph
    repeating its own needle term. The matching eval case queries that term,
    so the only lexically related chunk is the planted one.
    """
    root = Path(dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    cases, manifest = [], []
    for i in range(n_docs):
        needle = needle_word(i)
        paras = _paragraphs(rng, paragraphs)
        at = rng.randrange(len(paras) + 1)
        paras.insert(at, f"The {needle} rule: give {needle} only after {needle} review.")
        name = f"needle-{i:02d}.txt"
        (root / name).write_text("\n\n".join(paras) + "\n", encoding="utf-8")
        manifest.append({"file": name, "title": f"Needle guideline {i + 1}", "guideline_no": i + 1 if i < 35 else None})
        cases.append({"query": needle, "relevant_doc_ids": [name]})
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return cases


def write_eval_cases(cases, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(json.dumps(c) + "\n")
