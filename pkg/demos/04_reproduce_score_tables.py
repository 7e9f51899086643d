"""
Accuracy and comparison tables from graded items
================================================

The bundled counts expand into one graded item per scenario, replicate and
category.  Standard formulas are applied to them, and the published values
are shown alongside for the human vs GPT4.0-RAG comparison.
"""

from ragline import accuracy_table, compare_models
from ragline.evaluator import accuracy_tsv, comparison_tsv
from ragline.fixtures import reported_grades

grades = reported_grades()
print(len(grades), "graded items")

print(accuracy_tsv(accuracy_table(grades)))

rows = compare_models(grades, "human", "gpt4.0-rag")
print(comparison_tsv(rows, "human", "gpt4.0-rag"))

# plain Pearson instead of the Yates-corrected default
for r in compare_models(grades, "human", "gpt4.0-rag", yates=False):
    print(f"{r.category:20} chi2={r.chi2.statistic:.3f}  p={r.chi2.p_value:.3f}")
