"""Question/answer dataset generation from selected chunks.

Chunks are filtered by a minimum word count, sampled per document with
a seeded generator, and sent one at a time to a chat provider that must
reply with "QUESTION: ..." and "ANSWER: ..." lines. Parse failures are
retried once with a format reminder. The dataset round-trips through a
fixed-column CSV.
"""

from __future__ import annotations

import csv
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ragmark.chat import ChatProvider
from ragmark.corpus import DocumentType
from ragmark.errors import (
    DuplicateRef,
    EmptyField,
    EmptyInput,
    InsufficientChunks,
    InvalidConfig,
    MalformedResponse,
    SchemaError,
)
from ragmark.splitters import Chunk, SplittingMethod
from ragmark.vecindex import ChunkRef

TEMPLATES: dict[str, str] = {
    "qa-v1": (
        "You write evaluation questions. Read the passage between the fences "
        "and produce exactly one question that can be answered using only the "
        "passage, together with its answer.\n"
        "```\n{passage}\n```\n"
        "Reply with exactly two lines:\n"
        "QUESTION: <the question>\n"
        "ANSWER: <the answer>"
    ),
}

_FORMAT_REMINDER = (
    '\n\nReminder: reply with exactly two lines, the first starting with '
    '"QUESTION: " and the second with "ANSWER: ".'
)

DATASET_COLUMNS = (
    "qa_id", "doc_id", "doc_type", "method", "chunk_index",
    "question", "reference_answer", "model_id", "temperature", "template_id",
)


@dataclass(frozen=True)
class GenConfig:
    # 50 per document: a 3-document corpus under 2 splitters yields 300
    # rows, the scale the scoring tables are designed around
    per_doc_count: int = 50
    min_chunk_words: int = 50
    seed: int = 0
    template_id: str = "qa-v1"

    def __post_init__(self) -> None:
        if self.per_doc_count <= 0:
            raise InvalidConfig("per_doc_count must be positive")
        if self.min_chunk_words <= 0:
            raise InvalidConfig("min_chunk_words must be positive")
        if self.template_id not in TEMPLATES:
            raise InvalidConfig(f"unknown template_id {self.template_id!r}")


@dataclass(frozen=True)
class QAPair:
    qa_id: str
    question: str
    reference_answer: str
    source: ChunkRef
    doc_type: DocumentType
    method: SplittingMethod
    model_id: str
    temperature: float
    template_id: str

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise EmptyField("question is empty")
        if not self.reference_answer.strip():
            raise EmptyField("reference_answer is empty")
        if self.source.method != self.method.token:
            raise InvalidConfig(
                f"method {self.method.token} does not match source {self.source}"
            )


def select_chunks(chunks: list[Chunk], cfg: GenConfig) -> list[Chunk]:
    """Per-document seeded sampling of chunks long enough to question.

    Eligibility is at least ``min_chunk_words`` whitespace-separated
    words. Every document present in ``chunks`` must have at least
    ``per_doc_count`` eligible chunks or the whole call fails, listing
    each shortfall. Output is sorted by (doc_id, chunk_index, method).
    """
    if not chunks:
        raise EmptyInput("no chunks to select from")
    eligible: dict[str, list[Chunk]] = {}
    for chunk in chunks:
        eligible.setdefault(chunk.doc_id, [])
        if len(chunk.text.split()) >= cfg.min_chunk_words:
            eligible[chunk.doc_id].append(chunk)
    shortfalls = [
        f"{doc_id}: {len(have)} eligible, {cfg.per_doc_count} requested"
        for doc_id, have in sorted(eligible.items())
        if len(have) < cfg.per_doc_count
    ]
    if shortfalls:
        raise InsufficientChunks(
            "not enough eligible chunks: " + "; ".join(shortfalls)
        )
    selected: list[Chunk] = []
    for doc_id in sorted(eligible):
        pool = sorted(
            eligible[doc_id], key=lambda c: (c.chunk_index, c.method.token)
        )
        # per-document generator: adding a document never reshuffles others
        rng = random.Random(f"{cfg.seed}:{doc_id}")
        picked = rng.sample(pool, cfg.per_doc_count)
        selected.extend(
            sorted(picked, key=lambda c: (c.chunk_index, c.method.token))
        )
    return selected


def _parse_qa_response(text: str) -> tuple[str, str]:
    question = None
    answer = None
    for line in text.split("\n"):
        stripped = line.strip()
        if question is None and stripped.startswith("QUESTION:"):
            question = stripped[len("QUESTION:"):].strip()
        elif question is not None and stripped.startswith("ANSWER:"):
            answer = stripped[len("ANSWER:"):].strip()
            break
    if question is None or answer is None:
        raise MalformedResponse(
            "expected QUESTION:/ANSWER: lines, got: " + text[:120].replace("\n", "\\n")
        )
    if not question or not answer:
        raise EmptyField("QUESTION or ANSWER line has no text")
    return question, answer


def generate_qa(
    chat: ChatProvider,
    chunk: Chunk,
    doc_type: DocumentType,
    template_id: str = "qa-v1",
) -> QAPair:
    """One question/answer pair for one chunk, with provenance attached."""
    if not chunk.text.strip():
        raise EmptyInput(f"chunk {chunk.doc_id}:{chunk.chunk_index} is empty")
    try:
        template = TEMPLATES[template_id]
    except KeyError:
        raise InvalidConfig(f"unknown template_id {template_id!r}") from None
    prompt = template.format(passage=chunk.text)
    response = chat.complete([{"role": "user", "content": prompt}])
    try:
        question, answer = _parse_qa_response(response)
    except MalformedResponse:
        retry_prompt = prompt + _FORMAT_REMINDER
        response = chat.complete([{"role": "user", "content": retry_prompt}])
        question, answer = _parse_qa_response(response)
    ref = ChunkRef(chunk.doc_id, chunk.chunk_index, chunk.method.token)
    return QAPair(
        qa_id=ref.serialize(),
        question=question,
        reference_answer=answer,
        source=ref,
        doc_type=doc_type,
        method=chunk.method,
        model_id=chat.model_id,
        temperature=chat.temperature,
        template_id=template_id,
    )


def generate_dataset(
    chat: ChatProvider,
    chunks: list[Chunk],
    doc_types: dict[str, DocumentType],
    template_id: str = "qa-v1",
    max_in_flight: int = 1,
) -> list[QAPair]:
    """QA pairs for each chunk, in input order.

    ``doc_types`` maps doc_id to its DocumentType. Requests run on up
    to ``max_in_flight`` threads; the output order is still the input
    chunk order.
    """
    missing = sorted({c.doc_id for c in chunks} - set(doc_types))
    if missing:
        raise InvalidConfig("no doc_type for: " + ", ".join(missing))

    def one(chunk: Chunk) -> QAPair:
        return generate_qa(chat, chunk, doc_types[chunk.doc_id], template_id)

    if max_in_flight <= 1 or len(chunks) <= 1:
        return [one(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(one, chunks))


def write_dataset(pairs: list[QAPair], path: str | Path) -> None:
    seen: set[str] = set()
    for pair in pairs:
        if pair.qa_id in seen:
            raise DuplicateRef(f"duplicate qa_id {pair.qa_id}")
        seen.add(pair.qa_id)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for p in pairs:
            writer.writerow([
                p.qa_id, p.source.doc_id, p.doc_type.value, p.method.token,
                p.source.chunk_index, p.question, p.reference_answer,
                p.model_id, repr(p.temperature), p.template_id,
            ])


def read_dataset(path: str | Path) -> list[QAPair]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty dataset file") from None
        if tuple(header) != DATASET_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {list(DATASET_COLUMNS)}, got {header}"
            )
        pairs: list[QAPair] = []
        for row in reader:
            if len(row) != len(DATASET_COLUMNS):
                raise SchemaError(f"{path}: row has {len(row)} fields")
            rec = dict(zip(DATASET_COLUMNS, row))
            method = SplittingMethod.parse(rec["method"])
            pairs.append(QAPair(
                qa_id=rec["qa_id"],
                question=rec["question"],
                reference_answer=rec["reference_answer"],
                source=ChunkRef(rec["doc_id"], int(rec["chunk_index"]), method.token),
                doc_type=DocumentType.parse(rec["doc_type"]),
                method=method,
                model_id=rec["model_id"],
                temperature=float(rec["temperature"]),
                template_id=rec["template_id"],
            ))
    return pairs
