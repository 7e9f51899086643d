"""Statistics over graded responses: accuracy tables, Cohen's h, 2x2 chi-square.

Counts are kept as integers and proportions as :class:`fractions.Fraction`
so the tables are exact; rounding happens only when rendering.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ragline.errors import DegenerateTableError, GradesError

Z_95 = 1.959964
GRADES_HEADER = ["model_id", "scenario_id", "replicate_id", "category", "grade"]
N_SCENARIOS = 14


class Category(str, enum.Enum):
    FASTING = "fasting"
    CARB_LOADING = "carb_loading"
    MEDICATION = "medication"
    HEALTHCARE_TEAM = "healthcare_team"
    PREOP_OPTIMIZATION = "preop_optimization"
    DELAY_OPERATION = "delay_operation"


CATEGORY_LABELS = {
    Category.FASTING: "Fasting Instructions",
    Category.CARB_LOADING: "Preop Carbohydrate Loading",
    Category.MEDICATION: "Medication Instruction",
    Category.HEALTHCARE_TEAM: "Instruction for Healthcare Team",
    Category.PREOP_OPTIMIZATION: "Preoperative Optimization Required",
    Category.DELAY_OPERATION: "Need to Delay Operation",
}


class Grade(str, enum.Enum):
    CORRECT = "correct"
    WRONG = "wrong"
    HALLUCINATION = "hallucination"


@dataclass(frozen=True)
class GradedItem:
    model_id: str
    scenario_id: int
    replicate_id: int
    category: Category
    grade: Grade

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "grade", Grade(self.grade))
        if not 1 <= self.scenario_id <= N_SCENARIOS:
            raise GradesError(f"scenario_id {self.scenario_id} outside 1-{N_SCENARIOS}")
        if self.replicate_id < 1:
            raise GradesError(f"replicate_id must be >= 1, got {self.replicate_id}")

    @property
    def key(self):
        return (self.model_id, self.scenario_id, self.replicate_id, self.category.value)


@dataclass(frozen=True)
class ItemGrade:
    correct: bool
    hallucination: bool = False


@dataclass(frozen=True)
class EffectSize:
    h: float
    ci_low: float
    ci_high: float
    n1: int
    n2: int


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    yates: bool
    degenerate: bool = False


def aggregate_item_grades(items: Sequence[ItemGrade], threshold: float = 0.75) -> Grade:
    """Grade a whole response from its per-instruction grades.

    Any hallucination makes the response a hallucination; otherwise it is
    correct when the share of correct instructions reaches ``threshold``.
    """
    if not items:
        raise ValueError("cannot grade a response with no instructions")
    if any(i.hallucination for i in items):
        return Grade.HALLUCINATION
    share = Fraction(sum(1 for i in items if i.correct), len(items))
    return Grade.CORRECT if share >= Fraction(threshold).limit_denominator(10**6) else Grade.WRONG


def render_percent(p: Fraction, digits: int = 1) -> str:
    q = Decimal(p.numerator * 100) / Decimal(p.denominator)
    return f"{q.quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_UP)}%"


def render_fraction(x: int, n: int) -> str:
    return f"{x}/{n} ({render_percent(Fraction(x, n))})"


@dataclass
class ModelAccuracy:
    model_id: str
    per_category: dict[Category, tuple[int, int]] = field(default_factory=dict)
    hallucinations: int = 0

    @property
    def correct(self) -> int:
        return sum(c for c, _ in self.per_category.values())

    @property
    def total(self) -> int:
        return sum(n for _, n in self.per_category.values())

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.total)

    @property
    def hallucination_rate(self) -> Fraction:
        return Fraction(self.hallucinations, self.total)

    def to_dict(self) -> dict:
        cats = {}
        for cat in Category:
            if cat in self.per_category:
                x, n = self.per_category[cat]
                cats[cat.value] = {"correct": x, "total": n, "proportion": x / n, "label": render_fraction(x, n)}
        return {
            "model_id": self.model_id,
            "categories": cats,
            "correct": self.correct,
            "total": self.total,
            "accuracy": float(self.accuracy),
            "accuracy_label": render_fraction(self.correct, self.total),
            "hallucinations": self.hallucinations,
            "hallucination_rate": float(self.hallucination_rate),
            "hallucination_label": f"({self.hallucinations}/{self.total}) {render_percent(self.hallucination_rate)}",
        }


def check_unique(grades: Iterable[GradedItem]) -> None:
    seen = set()
    for g in grades:
        if g.key in seen:
            raise GradesError(f"duplicate graded item {g.key}")
        seen.add(g.key)


def accuracy_table(grades: Sequence[GradedItem]) -> dict[str, ModelAccuracy]:
    """Per-model, per-category correct counts in order of first appearance.

    Only ``correct`` counts as a success; hallucinations are tallied separately.
    """
    check_unique(grades)
    table: dict[str, ModelAccuracy] = {}
    for g in grades:
        row = table.setdefault(g.model_id, ModelAccuracy(g.model_id))
        x, n = row.per_category.get(g.category, (0, 0))
        row.per_category[g.category] = (x + (g.grade is Grade.CORRECT), n + 1)
        row.hallucinations += g.grade is Grade.HALLUCINATION
    for row in table.values():
        row.per_category = {c: row.per_category[c] for c in Category if c in row.per_category}
    return table


def hallucination_rate(grades: Sequence[GradedItem], model_id: str) -> Fraction:
    items = [g for g in grades if g.model_id == model_id]
    if not items:
        raise GradesError(f"unknown model {model_id!r}")
    return Fraction(sum(1 for g in items if g.grade is Grade.HALLUCINATION), len(items))


def _check_counts(x: int, n: int) -> None:
    if n < 1 or not 0 <= x <= n:
        raise ValueError(f"invalid counts x={x}, n={n}")


def cohens_h(x1: int, n1: int, x2: int, n2: int) -> float:
    """Cohen's h between proportions x1/n1 and x2/n2 (arcsine transform difference)."""
    _check_counts(x1, n1)
    _check_counts(x2, n2)
    return 2 * math.asin(math.sqrt(x1 / n1)) - 2 * math.asin(math.sqrt(x2 / n2))


def cohens_h_ci(x1: int, n1: int, x2: int, n2: int, z: float = Z_95) -> tuple[float, float]:
    """Normal-approximation interval ``h +/- z * sqrt(1/n1 + 1/n2)``."""
    h = cohens_h(x1, n1, x2, n2)
    half = z * math.sqrt(1 / n1 + 1 / n2)
    return h - half, h + half


def effect_size(x1: int, n1: int, x2: int, n2: int, z: float = Z_95) -> EffectSize:
    lo, hi = cohens_h_ci(x1, n1, x2, n2, z)
    return EffectSize(cohens_h(x1, n1, x2, n2), lo, hi, n1, n2)


def chi2_sf_1df(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    if x < 0:
        raise ValueError("chi-square statistic must be >= 0")
    return math.erfc(math.sqrt(x / 2))


def chi_square_2x2(a: int, b: int, c: int, d: int, yates: bool = True) -> ChiSquareResult:
    """Pearson chi-square for the table ``[[a, b], [c, d]]``, optionally Yates-corrected.

    Raises:
        DegenerateTableError: if any row or column sums to zero.
    """
    if min(a, b, c, d) < 0:
        raise ValueError("counts must be non-negative")
    n = a + b + c + d
    margins = (a + b) * (c + d) * (a + c) * (b + d)
    if margins == 0:
        raise DegenerateTableError(f"degenerate table [[{a}, {b}], [{c}, {d}]]")
    diff = Fraction(abs(a * d - b * c))
    if yates:
        diff = max(diff - Fraction(n, 2), Fraction(0))
    stat = float(n * diff * diff / margins)
    return ChiSquareResult(stat, chi2_sf_1df(stat), yates)


@dataclass(frozen=True)
class ComparisonRow:
    category: str
    x1: int
    n1: int
    x2: int
    n2: int
    effect: EffectSize
    chi2: ChiSquareResult

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "a": {"correct": self.x1, "total": self.n1},
            "b": {"correct": self.x2, "total": self.n2},
            "cohens_h": self.effect.h,
            "ci_low": self.effect.ci_low,
            "ci_high": self.effect.ci_high,
            "chi_square": self.chi2.statistic,
            "p_value": self.chi2.p_value,
            "yates": self.chi2.yates,
            "degenerate": self.chi2.degenerate,
        }


def _compare_counts(category: str, x1, n1, x2, n2, yates) -> ComparisonRow:
    try:
        chi = chi_square_2x2(x1, n1 - x1, x2, n2 - x2, yates)
    except DegenerateTableError:
        # both arms all-correct (or all-wrong): no evidence of a difference
        chi = ChiSquareResult(0.0, 1.0, yates, degenerate=True)
    return ComparisonRow(category, x1, n1, x2, n2, effect_size(x1, n1, x2, n2), chi)


def compare_models(grades: Sequence[GradedItem], model_a: str, model_b: str, yates: bool = True) -> list[ComparisonRow]:
    """Six per-category rows and an ``overall`` row comparing two models' correct rates."""
    table = accuracy_table(grades)
    for m in (model_a, model_b):
        if m not in table:
            raise GradesError(f"unknown model {m!r}")
    a, b = table[model_a], table[model_b]
    rows = []
    for cat in Category:
        if cat in a.per_category and cat in b.per_category:
            (x1, n1), (x2, n2) = a.per_category[cat], b.per_category[cat]
            rows.append(_compare_counts(cat.value, x1, n1, x2, n2, yates))
    rows.append(_compare_counts("overall", a.correct, a.total, b.correct, b.total, yates))
    return rows


# --- grades file I/O --------------------------------------------------------


def parse_grades_csv(text: str, source: str = "<grades>") -> list[GradedItem]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != GRADES_HEADER:
        raise GradesError(f"{source}:1: expected header {','.join(GRADES_HEADER)}")
    items = []
    seen = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(GRADES_HEADER):
            raise GradesError(f"{source}:{lineno}: expected {len(GRADES_HEADER)} fields, got {len(row)}")
        model, scen, rep, cat, grade = (c.strip() for c in row)
        try:
            item = GradedItem(model, int(scen), int(rep), Category(cat), Grade(grade))
        except (ValueError, GradesError) as exc:
            raise GradesError(f"{source}:{lineno}: {exc}") from exc
        if item.key in seen:
            raise GradesError(f"{source}:{lineno}: duplicate graded item {item.key} (first on line {seen[item.key]})")
        seen[item.key] = lineno
        items.append(item)
    return items


def read_grades_csv(path: str | Path) -> list[GradedItem]:
    return parse_grades_csv(Path(path).read_text(encoding="utf-8"), str(path))


def write_grades_csv(grades: Iterable[GradedItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRADES_HEADER)
        for g in grades:
            w.writerow([g.model_id, g.scenario_id, g.replicate_id, g.category.value, g.grade.value])


# --- reports ----------------------------------------------------------------


@lru_cache(maxsize=1)
def reported_values() -> dict:
    """Published per-category counts and comparison statistics, for side-by-side display."""
    return json.loads(resources.files("ragline.data").joinpath("reported_values.json").read_text(encoding="utf-8"))


def accuracy_tsv(table: dict[str, ModelAccuracy]) -> str:
    head = ["Models"] + [CATEGORY_LABELS[c] for c in Category] + ["Total correct", "Hallucinations present"]
    lines = ["\t".join(head)]
    for row in table.values():
        cells = [row.model_id]
        for cat in Category:
            cells.append(render_fraction(*row.per_category[cat]) if cat in row.per_category else "")
        cells.append(render_fraction(row.correct, row.total))
        cells.append(f"({row.hallucinations}/{row.total}) {render_percent(row.hallucination_rate)}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _reported_rows(model_a: str, model_b: str) -> Optional[dict]:
    ref = reported_values()["comparison"]
    if (model_a, model_b) == tuple(ref["models"]):
        return {r["category"]: r for r in ref["rows"]}
    return None


def comparison_tsv(rows: Sequence[ComparisonRow], model_a: str, model_b: str) -> str:
    reported = _reported_rows(model_a, model_b)
    head = ["Category", "Cohen's h", "95% CI", "Chi-square", "p-value"]
    if reported:
        head += ["reported h", "reported 95% CI", "reported chi-square", "reported p"]
    lines = ["\t".join(head)]
    for r in rows:
        label = CATEGORY_LABELS[Category(r.category)] if r.category != "overall" else "Overall"
        cells = [
            label,
            f"{r.effect.h:.3f}",
            f"({r.effect.ci_low:.3f}, {r.effect.ci_high:.3f})",
            f"{r.chi2.statistic:.3f}",
            f"{r.chi2.p_value:.3f}",
        ]
        if reported and r.category in reported:
            p = reported[r.category]
            cells += [f"{p['h']:.3f}", f"({p['ci'][0]:.3f}, {p['ci'][1]:.3f})", f"{p['chi_square']:.3f}", f"{p['p_value']:.3f}"]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def score_report(grades: Sequence[GradedItem], compare: Optional[tuple[str, str]] = None, yates: bool = True) -> dict:
    """Machine-readable report: accuracy table plus an optional model comparison."""
    table = accuracy_table(grades)
    report = {"models": [row.to_dict() for row in table.values()]}
    if compare is not None:
        a, b = compare
        rows = compare_models(grades, a, b, yates)
        reported = _reported_rows(a, b)
        out_rows = []
        for r in rows:
            d = r.to_dict()
            if reported and r.category in reported:
                d["reported"] = reported[r.category]
            out_rows.append(d)
        report["comparison"] = {"model_a": a, "model_b": b, "rows": out_rows}
    return report
