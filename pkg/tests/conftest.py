import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ragline.evaluator import write_grades_csv
from ragline.fixtures import reported_grades, write_eval_cases, write_needle_corpus

DATA = Path(__file__).parent / "data"


@pytest.fixture
def recorded_embeddings():
    return json.loads((DATA / "recorded_embeddings.json").read_text())


@pytest.fixture
def needle_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    cases = write_needle_corpus(corpus, n_docs=12)
    cases_path = tmp_path / "cases.jsonl"
    write_eval_cases(cases, cases_path)
    return corpus, cases, cases_path


@pytest.fixture
def grades_csv(tmp_path):
    path = tmp_path / "grades.csv"
    write_grades_csv(reported_grades(), path)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
