"""Embedding-based similarity: greedy token matching or sentence cosine.

TokenGreedy needs a provider with token-level embeddings: recall is
the mean over reference tokens of the best cosine against any candidate
token, precision is the mirror image, and the score is their F1,
clamped to [0, 1]. SentenceCosine is the documented fallback for
providers that only embed whole texts: max(0, cosine of the two
sentence embeddings). TokenGreedy F1 is symmetric under operand swap.
"""

from __future__ import annotations

import enum

import numpy as np

from ragmark.embeddings import EmbeddingProvider
from ragmark.errors import EmptyInput


class BertMode(enum.Enum):
    TOKEN_GREEDY = "token"
    SENTENCE_COSINE = "sentence"

    @classmethod
    def parse(cls, raw: str) -> "BertMode":
        for member in cls:
            if raw.strip().lower() == member.value:
                return member
        raise ValueError(f"unknown bert mode {raw!r}; expected token or sentence")


def _unit_matrix(vectors) -> np.ndarray:
    mat = np.stack([v.values for v in vectors])
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return mat / norms


def bert_score(candidate: str, reference: str, provider: EmbeddingProvider,
               mode: BertMode = BertMode.TOKEN_GREEDY) -> float:
    if not candidate or not reference:
        raise EmptyInput("bert_score needs non-empty candidate and reference")
    if mode is BertMode.SENTENCE_COSINE:
        from ragmark.embeddings import cosine

        value = cosine(provider.embed_text(candidate), provider.embed_text(reference))
        return max(0.0, value)
    cand = provider.embed_tokens(candidate)
    ref = provider.embed_tokens(reference)
    sim = _unit_matrix(cand.vectors) @ _unit_matrix(ref.vectors).T
    precision = float(np.mean(np.max(sim, axis=1)))
    recall = float(np.mean(np.max(sim, axis=0)))
    if precision + recall == 0.0:
        return 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return max(0.0, min(1.0, f1))
