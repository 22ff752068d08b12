"""Evaluation records, score differentials, and content features."""

from __future__ import annotations

import hashlib
import random
from importlib import resources

import pytest

from ragmark.analysis import (
    BASELINE_KIND,
    RECORD_COLUMNS,
    STOPWORDS_SHA256,
    CaseDifferential,
    ContentFeatures,
    EvalRecord,
    content_features,
    rank_differentials,
    read_records,
    stopwords,
    table5_report,
    write_records,
)
from ragmark.corpus import DocumentType
from ragmark.errors import (
    EmptyInput,
    InvalidConfig,
    MissingJoin,
    SchemaError,
    ValidationError,
)
from ragmark.metrics import MetricScores
from ragmark.qagen import QAPair
from ragmark.splitters import Chunk, SplittingMethod
from ragmark.vecindex import ChunkRef


def record(qa_id, backend="B1", final=0.5, doc_type=DocumentType.NOVEL,
           answer="an answer"):
    return EvalRecord(
        qa_id=qa_id,
        doc_type=doc_type,
        method=SplittingMethod.RECURSIVE_CHARACTER,
        backend_label=backend,
        retrieved=(ChunkRef("doc", 0, "RCS"),),
        generated_answer=answer,
        scores=MetricScores(sm=final, bleu=final, meteor=final,
                            bert=final, final=final),
    )


# ---------------------------------------------------------------- stopwords


def test_stopword_list_matches_pinned_checksum():
    raw = resources.files("ragmark").joinpath("data/stopwords_en.txt").read_bytes()
    assert hashlib.sha256(raw).hexdigest() == STOPWORDS_SHA256
    words = stopwords()
    assert len(words) == 50
    assert {"the", "is", "a", "of"} <= words


def test_stopword_loader_rejects_drift(monkeypatch):
    stopwords.cache_clear()
    monkeypatch.setattr("ragmark.analysis.STOPWORDS_SHA256", "0" * 64)
    with pytest.raises(ValidationError, match="checksum"):
        stopwords()
    monkeypatch.undo()
    stopwords.cache_clear()
    assert len(stopwords()) == 50


# ---------------------------------------------------------------- features


def test_content_features_hand_example():
    feats = content_features("the cat sat", "where is the cat")
    assert feats == ContentFeatures(
        chunk_size=11, key_term_frequency=1, text_complexity=3.0
    )


def test_content_features_empty_target():
    feats = content_features("", "where is the cat")
    assert feats == ContentFeatures(0, 0, 0.0)
    # whitespace-only: size counts characters, no word tokens
    blank = content_features("   ", "where is the cat")
    assert blank == ContentFeatures(3, 0, 0.0)


def test_content_features_counts_every_stem_occurrence():
    feats = content_features(
        "The cat saw another cat; cats everywhere.", "Where is the cat?"
    )
    assert feats.key_term_frequency == 3  # cat, cat, cats share one stem


def test_content_features_stem_bridges_inflection():
    # question says "running", target says "runs": same stem, one hit
    feats = content_features("he runs daily", "who was running")
    assert feats.key_term_frequency == 1


def test_content_features_size_includes_whitespace():
    assert content_features(" ab ", "ab").chunk_size == 4


# ------------------------------------------------------------ differentials


def test_rank_differentials_orders_top_then_bottom():
    records = [
        record("n1", final=0.9), record("n2", final=0.5), record("n3", final=0.1),
        record("a1", final=0.8, doc_type=DocumentType.ARTICLE),
        record("a2", final=0.6, doc_type=DocumentType.ARTICLE),
    ]
    out = rank_differentials(records, per_backend_top=2)
    assert [c.record.qa_id for c in out] == ["n1", "a1", "n3", "a2"]
    assert out[0].score_diff == pytest.approx(0.4)
    assert out[1].score_diff == pytest.approx(0.1)  # vs the article mean 0.7
    assert out[2].score_diff == pytest.approx(-0.4)
    assert all(c.baseline_kind == BASELINE_KIND for c in out)


def test_rank_differentials_ties_break_on_qa_id():
    records = [
        record("d", final=0.4), record("c", final=0.6),
        record("b", final=0.4), record("a", final=0.6),
    ]
    out = rank_differentials(records, per_backend_top=2)
    assert [c.record.qa_id for c in out] == ["a", "c", "b", "d"]


def test_rank_differentials_invariant_under_input_order():
    rng = random.Random(701)
    records = [
        record(f"r{i}", backend=rng.choice(["B1", "B2"]),
               final=round(rng.random(), 6),
               doc_type=rng.choice(list(DocumentType)))
        for i in range(40)
    ]
    base = rank_differentials(records, per_backend_top=3)
    shuffled = list(records)
    rng.shuffle(shuffled)
    again = rank_differentials(shuffled, per_backend_top=3)
    assert [(c.record.qa_id, c.score_diff) for c in base] == [
        (c.record.qa_id, c.score_diff) for c in again
    ]


def test_rank_differentials_backends_in_label_order():
    records = [
        record("z1", backend="ZZ", final=0.2),
        record("z2", backend="ZZ", final=0.8),
        record("a1", backend="AA", final=0.3),
        record("a2", backend="AA", final=0.7),
    ]
    out = rank_differentials(records, per_backend_top=1)
    assert [c.record.backend_label for c in out] == ["AA", "AA", "ZZ", "ZZ"]


def test_rank_differentials_group_diffs_sum_to_zero():
    rng = random.Random(702)
    records = [
        record(f"r{i}", backend=rng.choice(["B1", "B2", "B3"]),
               final=round(rng.random(), 6),
               doc_type=rng.choice(list(DocumentType)))
        for i in range(60)
    ]
    out = rank_differentials(records, per_backend_top=60)
    seen: dict[str, CaseDifferential] = {}
    for case in out:
        seen[case.record.qa_id] = case
    assert len(seen) == 60  # a large top covers every record
    sums: dict[tuple[str, DocumentType], float] = {}
    for case in seen.values():
        key = (case.record.backend_label, case.record.doc_type)
        sums[key] = sums.get(key, 0.0) + case.score_diff
    for total in sums.values():
        assert abs(total) < 1e-9


def test_rank_differentials_rejects_bad_input():
    with pytest.raises(EmptyInput):
        rank_differentials([], per_backend_top=5)
    with pytest.raises(InvalidConfig):
        rank_differentials([record("x")], per_backend_top=0)


def test_eval_record_validation():
    with pytest.raises(ValidationError, match="retrieved is empty"):
        EvalRecord(
            qa_id="x", doc_type=DocumentType.NOVEL,
            method=SplittingMethod.RECURSIVE_CHARACTER, backend_label="B",
            retrieved=(), generated_answer="a",
            scores=MetricScores(0.5, 0.5, 0.5, 0.5, 0.5),
        )


# ---------------------------------------------------------------- report


def make_joined_case(text="the cat sat", question="where is the cat",
                     answer="on the mat", generated="a cat sat"):
    chunk = Chunk(doc_id="doc", chunk_index=0, char_start=0,
                  char_end=len(text), text=text,
                  method=SplittingMethod.RECURSIVE_CHARACTER)
    ref = ChunkRef("doc", 0, "RCS")
    pair = QAPair(
        qa_id=ref.serialize(), question=question, reference_answer=answer,
        source=ref, doc_type=DocumentType.NOVEL,
        method=SplittingMethod.RECURSIVE_CHARACTER,
        model_id="stub-chat", temperature=0.0, template_id="qa-v1",
    )
    rec = EvalRecord(
        qa_id=pair.qa_id, doc_type=DocumentType.NOVEL,
        method=SplittingMethod.RECURSIVE_CHARACTER, backend_label="B1",
        retrieved=(ref,), generated_answer=generated,
        scores=MetricScores(0.5, 0.5, 0.5, 0.5, 0.5),
    )
    return chunk, pair, CaseDifferential(record=rec, score_diff=0.1)


def test_table5_report_joins_chunk_features():
    chunk, pair, case = make_joined_case()
    rows = table5_report([case], [chunk], [pair])
    assert rows == [("Novel", 11, 1, 3.0)]


def test_table5_report_target_switches_text():
    chunk, pair, case = make_joined_case()
    generated = table5_report([case], [chunk], [pair], target="generated")
    assert generated[0][1] == len("a cat sat")
    reference = table5_report([case], [chunk], [pair], target="reference")
    assert reference[0][1] == len("on the mat")
    with pytest.raises(InvalidConfig):
        table5_report([case], [chunk], [pair], target="question")


def test_table5_report_missing_joins_name_the_case():
    chunk, pair, case = make_joined_case()
    with pytest.raises(MissingJoin, match="doc:0:RCS"):
        table5_report([case], [chunk], [])
    with pytest.raises(MissingJoin, match="doc:0:RCS"):
        table5_report([case], [], [pair])


# ---------------------------------------------------------------- records io


def test_records_csv_roundtrip(tmp_path):
    rng = random.Random(703)
    records = []
    for i in range(12):
        final = round(rng.random(), 10)
        records.append(EvalRecord(
            qa_id=f"doc{i}:{i}:TTS",
            doc_type=rng.choice(list(DocumentType)),
            method=SplittingMethod.TOKEN_TEXT,
            backend_label=rng.choice(["LMS", "OAI"]),
            retrieved=(ChunkRef(f"doc{i}", i, "TTS"), ChunkRef("other", 1, "RCS")),
            generated_answer=f"generated answer {i}, with a comma",
            scores=MetricScores(
                sm=final, bleu=final / 2, meteor=final / 3,
                bert=rng.random() * 2 - 1, final=final,
            ),
        ))
    path = tmp_path / "records.csv"
    write_records(records, path)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(RECORD_COLUMNS)
    loaded = read_records(path)
    assert loaded == records


def test_records_csv_bytes_deterministic(tmp_path):
    records = [record("doc:0:RCS", final=0.25)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records(records, a)
    write_records(records, b)
    assert a.read_bytes() == b.read_bytes()


def test_read_records_schema_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError, match="empty"):
        read_records(empty)

    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("qa_id,final\nx,0.5\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="expected columns"):
        read_records(bad_header)

    short_row = tmp_path / "short.csv"
    short_row.write_text(",".join(RECORD_COLUMNS) + "\nx,novel,RCS\n",
                         encoding="utf-8")
    with pytest.raises(SchemaError, match="fields"):
        read_records(short_row)
