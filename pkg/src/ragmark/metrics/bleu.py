"""Sentence-level BLEU over word tokens.

Variant notes (these choices are recorded in run metadata):
- tokens come from splitters.tokenize, lowercased, punctuation kept;
- n-gram orders are capped at the candidate length, so identical
  sentences score exactly 1.0 regardless of length;
- epsilon smoothing: a zero clipped count contributes 1e-9 to the
  numerator so the geometric mean stays defined;
- brevity penalty exp(1 - r/c) when the candidate is shorter than the
  reference, else 1.

BLEU is asymmetric by design: the candidate is scored against the
reference, not the other way around.
"""

from __future__ import annotations

import math
from collections import Counter

from ragmark.splitters import tokenize

_EPSILON = 1e-9


def _words(text: str) -> list[str]:
    return [t.text.lower() for t in tokenize(text)]


def _ngrams(words: list[str], n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def clipped_ngram_counts(candidate: str, reference: str, n: int) -> tuple[int, int]:
    """(clipped match count, total candidate n-grams) for order n."""
    cand = _words(candidate)
    ref = _words(reference)
    cand_counts = _ngrams(cand, n)
    ref_counts = _ngrams(ref, n)
    clipped = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
    total = sum(cand_counts.values())
    return clipped, total


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    cand = _words(candidate)
    ref = _words(reference)
    c = len(cand)
    r = len(ref)
    if c == 0:
        return 0.0
    orders = min(max_n, c)
    log_sum = 0.0
    for n in range(1, orders + 1):
        cand_counts = _ngrams(cand, n)
        ref_counts = _ngrams(ref, n)
        clipped = sum(min(k, ref_counts[g]) for g, k in cand_counts.items())
        total = sum(cand_counts.values())
        numerator = clipped if clipped > 0 else _EPSILON
        log_sum += math.log(numerator / total)
    geo_mean = math.exp(log_sum / orders)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return min(1.0, bp * geo_mean)
