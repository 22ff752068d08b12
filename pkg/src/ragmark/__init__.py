"""ragmark: a benchmark harness for RAG chunking and retrieval backends.

Splits corpora, builds embedding indexes, generates Q&A datasets,
scores generated answers with a weighted metric composite, and runs
one-way ANOVA plus Tukey-Kramer post-hoc comparisons over the results.
"""

from __future__ import annotations

__version__ = "0.1.0"
