"""
Splitting a guideline page into overlapping chunks
==================================================

Chunks are contiguous slices of the page; their offsets let you recover the
source text exactly.
"""

from ragline import SplitterConfig, split_page

page = (
    "Fasting\n\nNo solid food for 6 hours before anaesthesia. "
    "Clear fluids are allowed until 2 hours before.\n\n"
    "Diabetes\n\nOmit metformin on the morning of surgery. "
    "Check capillary glucose on arrival and hourly while fasted.\n"
)

# small chunks so the recursion is visible: paragraphs first, then lines, then words
for c in split_page(page, SplitterConfig(chunk_size=80, overlap=20), doc_id="demo.md", title="Demo"):
    print(f"{c.chunk_id:12} [{c.char_start:3}, {c.char_end:3}) {c.unit_len:3}  {c.text!r}")
    assert page[c.char_start:c.char_end] == c.text

# the same page measured in word pieces rather than characters
print()
for c in split_page(page, SplitterConfig(chunk_size=16, overlap=4, length_fn="tokens")):
    print(c.unit_len, repr(c.text))

# a run with no separators is hard-split at exactly chunk_size with the overlap as stride back-off
print([(c.char_start, c.char_end) for c in split_page("x" * 2500, SplitterConfig(1000, 100))])
