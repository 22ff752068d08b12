"""Answer-scoring metrics and their weighted composite.

Default weights follow the harness convention: string similarity 0.30,
BLEU 0.30, the unigram-alignment metric 0.20, and the embedding-based
score 0.20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ragmark.errors import InvalidConfig
from ragmark.metrics.bertscore import BertMode, bert_score
from ragmark.metrics.bleu import bleu
from ragmark.metrics.meteor import meteor
from ragmark.metrics.seqmatch import seq_matcher_ratio

__all__ = [
    "BertMode",
    "MetricScores",
    "MetricWeights",
    "bert_score",
    "bleu",
    "composite_score",
    "meteor",
    "seq_matcher_ratio",
]


@dataclass(frozen=True)
class MetricWeights:
    w_sm: float = 0.30
    w_bleu: float = 0.30
    w_meteor: float = 0.20
    w_bert: float = 0.20

    def __post_init__(self) -> None:
        weights = (self.w_sm, self.w_bleu, self.w_meteor, self.w_bert)
        if any(w < 0.0 or w > 1.0 for w in weights):
            raise InvalidConfig(f"metric weights must lie in [0,1], got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise InvalidConfig(
                f"metric weights must sum to 1, got {math.fsum(weights)!r}"
            )

    @classmethod
    def parse(cls, raw: str) -> "MetricWeights":
        """Parse a comma-separated "sm,bleu,meteor,bert" weight list."""
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 4:
            raise InvalidConfig(f"expected 4 comma-separated weights, got {raw!r}")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise InvalidConfig(f"weights must be numbers, got {raw!r}") from None
        return cls(*values)


@dataclass(frozen=True)
class MetricScores:
    sm: float
    bleu: float
    meteor: float
    bert: float
    final: float


def weighted_final(sm: float, bleu_v: float, meteor_v: float, bert_v: float,
                   weights: MetricWeights) -> float:
    """Weighted sum, quantized to 12 decimal digits.

    Quantization keeps the result within the 1e-12 contract of the raw
    weighted sum while making decimal-weight examples (0.30/0.20 etc.)
    land on their exact decimal values instead of 1-ulp neighbors.
    """
    total = math.fsum(
        (
            weights.w_sm * sm,
            weights.w_bleu * bleu_v,
            weights.w_meteor * meteor_v,
            weights.w_bert * bert_v,
        )
    )
    return round(total, 12)


def composite_score(candidate: str, reference: str,
                    weights: MetricWeights | None = None,
                    provider=None,
                    mode: BertMode = BertMode.TOKEN_GREEDY) -> MetricScores:
    """Run all four metrics and assemble the weighted final score."""
    if weights is None:
        weights = MetricWeights()
    sm = seq_matcher_ratio(candidate, reference)
    bleu_v = bleu(candidate, reference)
    meteor_v = meteor(candidate, reference)
    bert_v = bert_score(candidate, reference, provider, mode)
    return MetricScores(
        sm=sm,
        bleu=bleu_v,
        meteor=meteor_v,
        bert=bert_v,
        final=weighted_final(sm, bleu_v, meteor_v, bert_v, weights),
    )
