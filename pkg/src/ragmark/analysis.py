"""Per-case evaluation records, ranked score differentials, and
content-structure features of the extreme cases.

The differential baseline is the mean final score of the records
sharing (backend_label, doc_type); every output row carries the
baseline_kind stamp so the definition travels with the data. Feature
definitions (character chunk size, stemmed key-term occurrences, mean
word length) are this module's own; report headers state them.
"""

from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ragmark.corpus import DocumentType
from ragmark.errors import (
    EmptyInput,
    InvalidConfig,
    MissingJoin,
    SchemaError,
    ValidationError,
)
from ragmark.metrics import MetricScores
from ragmark.metrics.porter import stem
from ragmark.qagen import QAPair
from ragmark.splitters import Chunk, SplittingMethod
from ragmark.vecindex import ChunkRef

# sha256 of data/stopwords_en.txt; the loader refuses a drifted file
STOPWORDS_SHA256 = "426fb01377c02c5ab9d537798d17158c95fb44e7a2d8f3b837c503a0e1f0ce8b"

BASELINE_KIND = "mean(backend_label,doc_type)"

RECORD_COLUMNS = (
    "qa_id", "doc_type", "method", "backend_label",
    "final", "sm", "bleu", "meteor", "bert",
    "generated_answer", "retrieved",
)

TABLE5_COLUMNS = (
    "Document_Type", "Chunk_Size", "Key_Term_Frequency", "Text_Complexity",
)

_WORD = re.compile(r"[^\W_]+")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The fixed 50-word English stopword list shipped with the package."""
    raw = resources.files("ragmark").joinpath("data/stopwords_en.txt").read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != STOPWORDS_SHA256:
        raise ValidationError(
            f"stopword list checksum mismatch: {digest} != {STOPWORDS_SHA256}"
        )
    words = frozenset(w for w in raw.decode("utf-8").split("\n") if w)
    if len(words) != 50:
        raise ValidationError(f"stopword list must hold 50 words, got {len(words)}")
    return words


@dataclass(frozen=True)
class EvalRecord:
    qa_id: str
    doc_type: DocumentType
    method: SplittingMethod
    backend_label: str
    retrieved: tuple[ChunkRef, ...]
    generated_answer: str
    scores: MetricScores

    def __post_init__(self) -> None:
        if not self.retrieved:
            raise ValidationError(f"record {self.qa_id}: retrieved is empty")
        if not 0.0 <= self.scores.final <= 1.0:
            raise ValidationError(
                f"record {self.qa_id}: final {self.scores.final!r} outside [0,1]"
            )


@dataclass(frozen=True)
class CaseDifferential:
    record: EvalRecord
    score_diff: float
    baseline_kind: str = BASELINE_KIND


@dataclass(frozen=True)
class ContentFeatures:
    chunk_size: int
    key_term_frequency: int
    text_complexity: float


def content_features(target_text: str, question: str) -> ContentFeatures:
    """Size, key-term hits, and mean word length of a target text.

    chunk_size counts exactly the characters given (whitespace
    included). Key terms are the question's non-stopword word tokens,
    stemmed; the frequency is how many target tokens stem into that
    set. text_complexity is the mean word-token length.
    """
    stop = stopwords()
    key_stems = {
        stem(w) for w in (m.group(0).lower() for m in _WORD.finditer(question))
        if w not in stop
    }
    target_words = [m.group(0).lower() for m in _WORD.finditer(target_text)]
    hits = sum(1 for w in target_words if stem(w) in key_stems)
    complexity = (
        sum(len(w) for w in target_words) / len(target_words)
        if target_words else 0.0
    )
    return ContentFeatures(
        chunk_size=len(target_text),
        key_term_frequency=hits,
        text_complexity=complexity,
    )


def rank_differentials(
    records: list[EvalRecord], per_backend_top: int
) -> list[CaseDifferential]:
    """Extreme deviations from each (backend, doc_type) group mean.

    Per backend label: the ``per_backend_top`` largest positive
    deviations (descending), then the same count of most negative ones
    (ascending). Ties break on qa_id, so the output is invariant under
    input permutation.
    """
    if not records:
        raise EmptyInput("no records to rank")
    if per_backend_top <= 0:
        raise InvalidConfig("per_backend_top must be positive")
    sums: dict[tuple[str, DocumentType], list[float]] = {}
    for rec in records:
        sums.setdefault((rec.backend_label, rec.doc_type), []).append(
            rec.scores.final
        )
    # fsum keeps the baseline independent of input order
    baseline = {key: math.fsum(vals) / len(vals) for key, vals in sums.items()}
    by_backend: dict[str, list[CaseDifferential]] = {}
    for rec in records:
        diff = rec.scores.final - baseline[(rec.backend_label, rec.doc_type)]
        by_backend.setdefault(rec.backend_label, []).append(
            CaseDifferential(record=rec, score_diff=diff)
        )
    out: list[CaseDifferential] = []
    for label in sorted(by_backend):
        cases = by_backend[label]
        top = sorted(cases, key=lambda c: (-c.score_diff, c.record.qa_id))
        bottom = sorted(cases, key=lambda c: (c.score_diff, c.record.qa_id))
        out.extend(top[:per_backend_top])
        out.extend(bottom[:per_backend_top])
    return out


def table5_report(
    differentials: list[CaseDifferential],
    chunks: list[Chunk],
    dataset: list[QAPair],
    target: str = "chunk",
) -> list[tuple[str, int, int, float]]:
    """Content features of each differential case, Table-5 column order.

    ``target`` picks the text the features are computed on: the source
    chunk (default), the generated answer, or the reference answer.
    """
    if target not in ("chunk", "generated", "reference"):
        raise InvalidConfig(f"unknown feature target {target!r}")
    chunk_by_ref = {
        ChunkRef(c.doc_id, c.chunk_index, c.method.token): c for c in chunks
    }
    pair_by_id = {p.qa_id: p for p in dataset}
    rows: list[tuple[str, int, int, float]] = []
    for case in differentials:
        rec = case.record
        pair = pair_by_id.get(rec.qa_id)
        if pair is None:
            raise MissingJoin(f"qa_id {rec.qa_id} not in dataset")
        chunk = chunk_by_ref.get(pair.source)
        if chunk is None:
            raise MissingJoin(
                f"qa_id {rec.qa_id}: chunk {pair.source.serialize()} not found"
            )
        if target == "chunk":
            text = chunk.text
        elif target == "generated":
            text = rec.generated_answer
        else:
            text = pair.reference_answer
        feats = content_features(text, pair.question)
        rows.append((
            rec.doc_type.label,
            feats.chunk_size,
            feats.key_term_frequency,
            feats.text_complexity,
        ))
    return rows


def write_records(records: list[EvalRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([
                r.qa_id, r.doc_type.value, r.method.token, r.backend_label,
                repr(r.scores.final), repr(r.scores.sm), repr(r.scores.bleu),
                repr(r.scores.meteor), repr(r.scores.bert),
                r.generated_answer,
                ";".join(ref.serialize() for ref in r.retrieved),
            ])


def read_records(path: str | Path) -> list[EvalRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty records file") from None
        if tuple(header) != RECORD_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {list(RECORD_COLUMNS)}, got {header}"
            )
        records: list[EvalRecord] = []
        for row in reader:
            if len(row) != len(RECORD_COLUMNS):
                raise SchemaError(f"{path}: row has {len(row)} fields")
            rec = dict(zip(RECORD_COLUMNS, row))
            records.append(EvalRecord(
                qa_id=rec["qa_id"],
                doc_type=DocumentType.parse(rec["doc_type"]),
                method=SplittingMethod.parse(rec["method"]),
                backend_label=rec["backend_label"],
                retrieved=tuple(
                    ChunkRef.parse(part)
                    for part in rec["retrieved"].split(";") if part
                ),
                generated_answer=rec["generated_answer"],
                scores=MetricScores(
                    sm=float(rec["sm"]),
                    bleu=float(rec["bleu"]),
                    meteor=float(rec["meteor"]),
                    bert=float(rec["bert"]),
                    final=float(rec["final"]),
                ),
            ))
    return records
