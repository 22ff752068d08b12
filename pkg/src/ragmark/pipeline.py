"""End-to-end experiment pipeline.

Runs ingest, split, embed, index, question generation, evaluation,
statistics, and reporting from one config, writing every artifact into
an output directory. Per-record failures are quarantined rather than
aborting the run; stage-level failures name the failing stage. Given
the same config and replay fixtures, reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ragmark import __version__
from ragmark._kernels import BACKEND
from ragmark.analysis import (
    BASELINE_KIND,
    CaseDifferential,
    EvalRecord,
    TABLE5_COLUMNS,
    rank_differentials,
    table5_report,
    write_records,
)
from ragmark.chat import ChatConfig, ChatProvider, make_chat_provider
from ragmark.corpus import Document, DocumentType, load_corpus, load_manifest
from ragmark.embeddings import (
    EmbeddingProvider,
    ProviderConfig,
    ProviderKind,
    make_provider,
)
from ragmark.errors import (
    EmptyField,
    EmptyInput,
    InvalidConfig,
    RagmarkError,
)
from ragmark.metrics import BertMode, MetricWeights, composite_score
from ragmark.qagen import (
    GenConfig,
    QAPair,
    generate_qa,
    select_chunks,
    write_dataset,
)
from ragmark.splitters import (
    Chunk,
    SplitterConfig,
    SplittingMethod,
    split_document,
    write_chunks,
)
from ragmark.stats import (
    AnovaResult,
    GroupedScores,
    TukeyRow,
    describe,
    one_way_anova,
    tukey_hsd,
)
from ragmark.vecindex import ChunkRef, VectorIndex, build, query

log = logging.getLogger(__name__)

ANSWER_TEMPLATE_ID = "answer-v1"

ANOVA_COLUMNS = (
    "Source of Variation", "Sum of Squares", "Degrees of Freedom",
    "F-Value", "p-Value",
)
TUKEY_COLUMNS = (
    "Group1", "Group2", "Mean Difference", "p-adj", "Lower", "Upper", "Reject",
)
TABLE4_BASE_COLUMNS = ("Document_Type", "Splitting_Method*")

_CONFIG_KEYS = {
    "manifest", "output_dir", "seed", "retrieval_k", "bert_mode", "weights",
    "splitters", "backends", "chat", "qa", "per_backend_top",
}


@dataclass(frozen=True)
class BackendSpec:
    label: str
    provider: ProviderConfig

    def __post_init__(self) -> None:
        if not self.label or any(ch in self.label for ch in " ,;:/\\"):
            raise InvalidConfig(f"backend_label {self.label!r} must be a plain token")


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: str
    output_dir: str
    rcs: SplitterConfig
    tts: SplitterConfig
    backends: tuple[BackendSpec, ...]
    chat: ChatConfig
    gen: GenConfig
    retrieval_k: int = 4
    weights: MetricWeights = MetricWeights()
    bert_mode: BertMode = BertMode.TOKEN_GREEDY
    seed: int = 0
    per_backend_top: int = 5

    def __post_init__(self) -> None:
        if not self.backends:
            raise InvalidConfig("at least one embedding backend is required")
        labels = [b.label for b in self.backends]
        if len(set(labels)) != len(labels):
            raise InvalidConfig(f"backend_labels must be unique, got {labels}")
        if self.retrieval_k < 1:
            raise InvalidConfig("retrieval_k must be >= 1")
        if self.per_backend_top < 1:
            raise InvalidConfig("per_backend_top must be >= 1")
        if self.rcs.method is not SplittingMethod.RECURSIVE_CHARACTER:
            raise InvalidConfig("rcs splitter config has the wrong method")
        if self.tts.method is not SplittingMethod.TOKEN_TEXT:
            raise InvalidConfig("tts splitter config has the wrong method")

    @property
    def splitter_configs(self) -> tuple[SplitterConfig, ...]:
        return (self.rcs, self.tts)


def _parse_backend(raw: dict, config_dir: Path) -> BackendSpec:
    if not isinstance(raw, dict):
        raise InvalidConfig("each backend must be an object")
    label = raw.get("backend_label", "")
    kind = raw.get("kind", "mock")
    if kind == "mock":
        provider = ProviderConfig(
            kind=ProviderKind.DETERMINISTIC_MOCK,
            model_id=raw.get("model_id", f"mock:d{raw.get('dim', 64)}:s{raw.get('seed', 0)}"),
            mock_dim=int(raw.get("dim", 64)),
            mock_seed=int(raw.get("seed", 0)),
        )
    elif kind == "remote":
        cache_dir = raw.get("cache_dir")
        if cache_dir is not None:
            cache_dir = str((config_dir / cache_dir).resolve())
        provider = ProviderConfig(
            kind=ProviderKind.REMOTE_OPENAI_COMPATIBLE,
            model_id=raw.get("model_id", ""),
            base_url=raw.get("base_url", ""),
            api_key_env=raw.get("api_key_env", "RAGMARK_API_KEY"),
            timeout=float(raw.get("timeout", 30.0)),
            max_in_flight=int(raw.get("max_in_flight", 4)),
            cache_dir=cache_dir,
        )
    else:
        raise InvalidConfig(f"unknown backend kind {kind!r}")
    return BackendSpec(label=label, provider=provider)


def _parse_splitter(method: SplittingMethod, raw: dict) -> SplitterConfig:
    if not isinstance(raw, dict):
        raise InvalidConfig(f"splitter {method.token} config must be an object")
    kwargs = {
        "method": method,
        "chunk_size": int(raw.get("chunk_size", 250 if method is SplittingMethod.TOKEN_TEXT else 1000)),
        "overlap": int(raw.get("overlap", 50 if method is SplittingMethod.TOKEN_TEXT else 200)),
    }
    if "separators" in raw:
        kwargs["separators"] = tuple(raw["separators"])
    return SplitterConfig(**kwargs)


def load_experiment_config(
    path: str | Path, overrides: dict | None = None
) -> ExperimentConfig:
    """Parse a JSON experiment config; ``overrides`` (from CLI flags)
    take precedence over file values. Relative manifest and replay
    paths resolve against the config file's directory; output_dir
    resolves against the caller's working directory.
    """
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidConfig(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidConfig("config root must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    config_dir = p.parent

    manifest = data.get("manifest")
    if not manifest:
        raise InvalidConfig("config must name a corpus manifest")
    manifest_path = str((config_dir / manifest)) if not Path(manifest).is_absolute() else manifest

    splitters_raw = data.get("splitters", {})
    rcs = _parse_splitter(
        SplittingMethod.RECURSIVE_CHARACTER, splitters_raw.get("RCS", {})
    )
    tts = _parse_splitter(SplittingMethod.TOKEN_TEXT, splitters_raw.get("TTS", {}))

    backends_raw = data.get("backends")
    if not backends_raw or not isinstance(backends_raw, list):
        raise InvalidConfig("config must list at least one backend")
    backends = tuple(_parse_backend(b, config_dir) for b in backends_raw)

    chat_raw = dict(data.get("chat", {}))
    for path_key in ("replay_path", "record_path"):
        value = chat_raw.get(path_key)
        if value and not Path(value).is_absolute():
            chat_raw[path_key] = str(config_dir / value)
    try:
        chat = ChatConfig(**chat_raw)
    except TypeError as exc:
        raise InvalidConfig(f"chat config: {exc}") from None

    seed = int(data.get("seed", 0))
    qa_raw = dict(data.get("qa", {}))
    qa_raw.setdefault("seed", seed)
    gen = GenConfig(**qa_raw)

    weights_raw = data.get("weights")
    if weights_raw is None:
        weights = MetricWeights()
    elif isinstance(weights_raw, str):
        weights = MetricWeights.parse(weights_raw)
    elif isinstance(weights_raw, list) and len(weights_raw) == 4:
        weights = MetricWeights(*[float(w) for w in weights_raw])
    else:
        raise InvalidConfig("weights must be a 4-float list or a comma string")

    bert_raw = data.get("bert_mode", "token")
    try:
        bert_mode = BertMode.parse(str(bert_raw))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None

    return ExperimentConfig(
        manifest_path=manifest_path,
        output_dir=str(data.get("output_dir", "run_out")),
        rcs=rcs,
        tts=tts,
        backends=backends,
        chat=chat,
        gen=gen,
        retrieval_k=int(data.get("retrieval_k", 4)),
        weights=weights,
        bert_mode=bert_mode,
        seed=seed,
        per_backend_top=int(data.get("per_backend_top", 5)),
    )


@contextmanager
def _stage(name: str):
    """Names the failing stage on any pipeline error."""
    log.info("stage %s", name)
    try:
        yield
    except RagmarkError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc


def generate_answer(
    chat: ChatProvider,
    question: str,
    retrieved_chunks: list[tuple[ChunkRef, str]],
) -> str:
    """Answer a question from retrieved chunk texts, verbatim from the model.

    The prompt lists each chunk with a source marker in retrieval
    order, then the question, then an instruction to answer only from
    the context.
    """
    if not retrieved_chunks:
        raise EmptyInput("generate_answer needs at least one retrieved chunk")
    lines = ["Context:"]
    for i, (ref, text) in enumerate(retrieved_chunks, start=1):
        lines.append(f"[source {i}: {ref.serialize()}] {text}")
    lines.append("")
    lines.append(f"Question: {question}")
    lines.append("Answer using only the context above.")
    answer = chat.complete([{"role": "user", "content": "\n".join(lines)}])
    if not answer.strip():
        raise EmptyField("chat completion is empty")
    return answer


@dataclass(frozen=True)
class RunResult:
    output_dir: Path
    record_counts: dict[str, int]
    qa_count: int
    quarantine_count: int


def _write_csv(path: Path, header: tuple[str, ...], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def _doc_type_anova(records: list[EvalRecord]) -> AnovaResult:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(rec.doc_type.label, []).append(rec.scores.final)
    return one_way_anova(
        GroupedScores.from_pairs(sorted(groups.items()))
    )


def _method_anova(records: list[EvalRecord]) -> AnovaResult:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(rec.method.token, []).append(rec.scores.final)
    return one_way_anova(GroupedScores.from_pairs(sorted(groups.items())))


def _doc_type_tukey(records: list[EvalRecord], alpha: float = 0.05) -> list[TukeyRow]:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(rec.doc_type.label, []).append(rec.scores.final)
    return tukey_hsd(GroupedScores.from_pairs(sorted(groups.items())), alpha=alpha)


def _table4_rows(
    differentials: list[CaseDifferential], labels: list[str]
) -> list[list[str]]:
    rows = []
    for case in differentials:
        rec = case.record
        row = [rec.doc_type.label, rec.method.token]
        for label in labels:
            if label == rec.backend_label:
                row.extend([_fmt(rec.scores.final), _fmt(case.score_diff)])
            else:
                row.extend(["-", "-"])
        rows.append(row)
    return rows


def run_pipeline(config: ExperimentConfig) -> RunResult:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    quarantine: list[dict] = []

    with _stage("ingest"):
        manifest = load_manifest(config.manifest_path)
        docs = load_corpus(manifest)
        doc_types = {d.id: d.doc_type for d in docs}

    chunks_by_method: dict[SplittingMethod, list[Chunk]] = {}
    with _stage("split"):
        for cfg in config.splitter_configs:
            chunks: list[Chunk] = []
            for doc in docs:
                chunks.extend(split_document(doc, cfg))
            chunks_by_method[cfg.method] = chunks
            write_chunks(chunks, out / f"chunks_{cfg.method.token}.jsonl")
    chunk_text = {
        ChunkRef(c.doc_id, c.chunk_index, m.token): c.text
        for m, chunks in chunks_by_method.items() for c in chunks
    }

    providers: dict[str, EmbeddingProvider] = {}
    indexes: dict[tuple[str, SplittingMethod], VectorIndex] = {}
    with _stage("embed"):
        for spec in config.backends:
            providers[spec.label] = make_provider(spec.provider)
    with _stage("index"):
        for spec in config.backends:
            provider = providers[spec.label]
            for method, chunks in chunks_by_method.items():
                items = [
                    (
                        ChunkRef(c.doc_id, c.chunk_index, method.token),
                        provider.embed_text(c.text),
                    )
                    for c in chunks
                ]
                indexes[(spec.label, method)] = build(items)

    with _stage("gen-qa"):
        chat = make_chat_provider(config.chat)
        pairs: list[QAPair] = []
        for cfg in config.splitter_configs:
            selected = select_chunks(chunks_by_method[cfg.method], config.gen)
            for chunk in selected:
                try:
                    pairs.append(generate_qa(
                        chat, chunk, doc_types[chunk.doc_id],
                        config.gen.template_id,
                    ))
                except RagmarkError as exc:
                    quarantine.append({
                        "stage": "gen-qa",
                        "key": ChunkRef(
                            chunk.doc_id, chunk.chunk_index, cfg.method.token
                        ).serialize(),
                        "error_type": type(exc).__name__,
                        "message": str(exc),
                    })
        if not pairs:
            raise EmptyInput("question generation produced no usable pairs")
        write_dataset(pairs, out / "eval_ds.csv")

    records_by_backend: dict[str, list[EvalRecord]] = {}
    with _stage("eval"):
        for spec in config.backends:
            provider = providers[spec.label]
            records: list[EvalRecord] = []
            for pair in pairs:
                try:
                    index = indexes[(spec.label, pair.method)]
                    hits = query(
                        index, provider.embed_text(pair.question),
                        config.retrieval_k,
                    )
                    retrieved = [(h.ref, chunk_text[h.ref]) for h in hits]
                    answer = generate_answer(chat, pair.question, retrieved)
                    scores = composite_score(
                        answer, pair.reference_answer, config.weights,
                        provider=provider, mode=config.bert_mode,
                    )
                    records.append(EvalRecord(
                        qa_id=pair.qa_id,
                        doc_type=pair.doc_type,
                        method=pair.method,
                        backend_label=spec.label,
                        retrieved=tuple(h.ref for h in hits),
                        generated_answer=answer,
                        scores=scores,
                    ))
                except RagmarkError as exc:
                    quarantine.append({
                        "stage": "eval",
                        "key": pair.qa_id,
                        "backend_label": spec.label,
                        "error_type": type(exc).__name__,
                        "message": str(exc),
                    })
            records_by_backend[spec.label] = records
            write_records(records, out / f"records_{spec.label}.csv")

    labels = [spec.label for spec in config.backends]
    with _stage("stats"):
        anova_rows: list[list] = []
        method_anova_rows: list[list] = []
        for label in labels:
            records = records_by_backend[label]
            a = _doc_type_anova(records)
            anova_rows.append([
                f"{label} Document Type", _fmt(a.ss_between),
                str(a.df_between), _fmt(a.f_value), _fmt(a.p_value),
            ])
            anova_rows.append([
                f"{label} Residual", _fmt(a.ss_within),
                str(a.df_within), "N/A", "N/A",
            ])
            m = _method_anova(records)
            method_anova_rows.append([
                f"{label} Splitting Method", _fmt(m.ss_between),
                str(m.df_between), _fmt(m.f_value), _fmt(m.p_value),
            ])
            method_anova_rows.append([
                f"{label} Residual", _fmt(m.ss_within),
                str(m.df_within), "N/A", "N/A",
            ])
            tukey_rows = [
                [
                    row.group1, row.group2, _fmt(row.mean_diff),
                    _fmt(row.p_adj), _fmt(row.lower), _fmt(row.upper),
                    str(row.reject),
                ]
                for row in _doc_type_tukey(records)
            ]
            _write_csv(out / f"tukey_{label}.csv", TUKEY_COLUMNS, tukey_rows)
        _write_csv(out / "anova.csv", ANOVA_COLUMNS, anova_rows)
        _write_csv(
            out / "anova_method.csv",
            ("Source", "Sum of Squares", "df", "F", "p-value"),
            method_anova_rows,
        )

    with _stage("report"):
        # Splitting-method comparison: count of dataset pairs per
        # method, mean final score per backend
        split_rows = []
        for cfg in config.splitter_configs:
            method = cfg.method
            count = sum(1 for p in pairs if p.method is method)
            row = [method.display, str(count)]
            for label in labels:
                finals = [
                    r.scores.final for r in records_by_backend[label]
                    if r.method is method
                ]
                row.append(_fmt(sum(finals) / len(finals)) if finals else "-")
            split_rows.append(row)
        _write_csv(
            out / "split_compare.csv",
            ("Splitting Method", "Count", *(f"{lb} Final Avg Score" for lb in labels)),
            split_rows,
        )

        hist_rows = []
        for label in labels:
            finals = [r.scores.final for r in records_by_backend[label]]
            summary = describe(finals)
            for i, (lo, hi, count) in enumerate(summary.histogram):
                hist_rows.append([label, str(i), _fmt(lo), _fmt(hi), str(count)])
        _write_csv(
            out / "hist_final.csv",
            ("backend_label", "bin_index", "bin_start", "bin_end", "count"),
            hist_rows,
        )

        doctype_rows = []
        for label in labels:
            by_type: dict[str, list[float]] = {}
            for r in records_by_backend[label]:
                by_type.setdefault(r.doc_type.label, []).append(r.scores.final)
            for type_label in sorted(by_type):
                vals = by_type[type_label]
                doctype_rows.append([
                    label, type_label, str(len(vals)),
                    _fmt(sum(vals) / len(vals)),
                ])
        _write_csv(
            out / "bars_doctype.csv",
            ("backend_label", "doc_type", "count", "mean_final"),
            doctype_rows,
        )

        method_rows = []
        for label in labels:
            for cfg in config.splitter_configs:
                vals = [
                    r.scores.final for r in records_by_backend[label]
                    if r.method is cfg.method
                ]
                if vals:
                    method_rows.append([
                        label, cfg.method.token, str(len(vals)),
                        _fmt(sum(vals) / len(vals)),
                    ])
        _write_csv(
            out / "bars_method.csv",
            ("backend_label", "method", "count", "mean_final"),
            method_rows,
        )

        all_records = [r for label in labels for r in records_by_backend[label]]
        differentials = rank_differentials(all_records, config.per_backend_top)
        table4_header = (*TABLE4_BASE_COLUMNS, *(
            col for lb in labels
            for col in (f"Final_Avg_Score_{lb}", f"Score_Diff_{lb}")
        ))
        _write_csv(out / "table4.csv", table4_header,
                   _table4_rows(differentials, labels))

        all_chunks = [c for chunks in chunks_by_method.values() for c in chunks]
        t5 = table5_report(differentials, all_chunks, pairs)
        _write_csv(out / "table5.csv", TABLE5_COLUMNS, [
            [doc_type, str(size), str(freq), _fmt(complexity)]
            for doc_type, size, freq, complexity in t5
        ])

    if quarantine:
        qdir = out / "quarantine"
        qdir.mkdir(exist_ok=True)
        with open(qdir / "quarantine.jsonl", "w", encoding="utf-8") as fh:
            for entry in quarantine:
                fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")

    meta = {
        "package": {"name": "ragmark", "version": __version__},
        "runtime": {
            "python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__,
            "kernel_backend": BACKEND,
        },
        "seed": config.seed,
        "retrieval_k": config.retrieval_k,
        "bert_mode": config.bert_mode.value,
        "weights": {
            "sm": config.weights.w_sm, "bleu": config.weights.w_bleu,
            "meteor": config.weights.w_meteor, "bert": config.weights.w_bert,
        },
        "splitters": {
            cfg.method.token: {
                "chunk_size": cfg.chunk_size, "overlap": cfg.overlap,
            }
            for cfg in config.splitter_configs
        },
        "backends": [
            {
                "backend_label": spec.label,
                "kind": spec.provider.kind.value,
                "model_id": spec.provider.model_id,
                **(
                    {"dim": spec.provider.mock_dim, "seed": spec.provider.mock_seed}
                    if spec.provider.kind is ProviderKind.DETERMINISTIC_MOCK
                    else {"base_url": spec.provider.base_url}
                ),
            }
            for spec in config.backends
        ],
        "chat": {
            "kind": config.chat.kind,
            "model_id": config.chat.model_id,
            "temperature": config.chat.temperature,
            **(
                {"replay_file": Path(config.chat.replay_path).name}
                if config.chat.replay_path else {}
            ),
        },
        "qa": {
            "per_doc_count": config.gen.per_doc_count,
            "min_chunk_words": config.gen.min_chunk_words,
            "seed": config.gen.seed,
            "template_id": config.gen.template_id,
        },
        "answer_template_id": ANSWER_TEMPLATE_ID,
        "baseline_kind": BASELINE_KIND,
        "metric_variants": {
            "bleu": "orders capped at candidate length, 1e-9 numerator smoothing",
            "meteor": "exact+stem alignment, minimal chunk count, 0.5*(ch/m)^3 penalty",
            "sm": "gestalt character matching without junk heuristics",
            "final": "weighted sum quantized to 12 decimal digits",
        },
        "counts": {
            "documents": len(docs),
            "chunks": {
                m.token: len(chunks_by_method[m]) for m in chunks_by_method
            },
            "qa_pairs": len(pairs),
            "records": {lb: len(records_by_backend[lb]) for lb in labels},
            "quarantined": len(quarantine),
        },
    }
    with open(out / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return RunResult(
        output_dir=out,
        record_counts={lb: len(records_by_backend[lb]) for lb in labels},
        qa_count=len(pairs),
        quarantine_count=len(quarantine),
    )
