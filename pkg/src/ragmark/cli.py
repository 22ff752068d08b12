"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, split, embed, index,
gen-qa, eval, stats, report), plus ``run`` for the whole experiment and
``score`` for a single candidate/reference pair. Exit codes: 0 success,
2 validation error, 3 upstream service error, 4 run completed with a
non-empty quarantine.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ragmark import __version__
from ragmark.analysis import rank_differentials, read_records, table5_report
from ragmark.chat import make_chat_provider
from ragmark.corpus import DocumentType, corpus_summary, load_corpus, load_manifest
from ragmark.errors import (
    InvalidConfig,
    MalformedResponse,
    ProviderError,
    RagmarkError,
    ReplayMiss,
    ValidationError,
)
from ragmark.metrics import BertMode, MetricWeights, composite_score
from ragmark.pipeline import (
    ANOVA_COLUMNS,
    TUKEY_COLUMNS,
    ExperimentConfig,
    generate_answer,
    load_experiment_config,
    run_pipeline,
)
from ragmark.qagen import generate_qa, select_chunks, write_dataset
from ragmark.splitters import (
    SplitterConfig,
    SplittingMethod,
    read_chunks,
    split_document,
    write_chunks,
)
from ragmark.stats import GroupedScores, one_way_anova, tukey_hsd
from ragmark.vecindex import ChunkRef, build, save
from ragmark.embeddings import EmbeddingVector, make_provider

log = logging.getLogger(__name__)


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for key in ("output_dir", "seed", "retrieval_k"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "weights", None):
        overrides["weights"] = args.weights
    if getattr(args, "bert_mode", None):
        overrides["bert_mode"] = args.bert_mode
    return load_experiment_config(args.config, overrides)


def _provider_for_label(config: ExperimentConfig, label: str):
    for spec in config.backends:
        if spec.label == label:
            return make_provider(spec.provider)
    labels = [s.label for s in config.backends]
    raise InvalidConfig(f"no backend labeled {label!r}; config has {labels}")


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    docs = load_corpus(manifest)
    for doc_type, count in corpus_summary(manifest).items():
        print(f"{doc_type.label}: {count}")
    total_chars = sum(len(d.text) for d in docs)
    print(f"Documents: {len(docs)} ({total_chars} characters after normalization)")
    return 0


def cmd_split(args) -> int:
    method = SplittingMethod.parse(args.method)
    kwargs = {"method": method, "chunk_size": args.chunk_size, "overlap": args.overlap}
    if args.separators is not None:
        kwargs["separators"] = tuple(
            s.replace("\\n", "\n") for s in args.separators.split(",")
        )
    cfg = SplitterConfig(**kwargs)
    docs = load_corpus(load_manifest(args.manifest))
    chunks = []
    for doc in docs:
        chunks.extend(split_document(doc, cfg))
    write_chunks(chunks, args.out)
    print(f"{len(chunks)} chunks -> {args.out}")
    return 0


def cmd_embed(args) -> int:
    config = _config_from_args(args)
    provider = _provider_for_label(config, args.backend)
    chunks = read_chunks(args.chunks)
    with open(args.out, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            vec = provider.embed_text(chunk.text)
            ref = ChunkRef(chunk.doc_id, chunk.chunk_index, chunk.method.token)
            fh.write(json.dumps({
                "ref": ref.serialize(),
                "model_id": vec.model_id,
                "dim": vec.dim,
                "values": [float(v) for v in vec.values],
            }) + "\n")
    print(f"{len(chunks)} embeddings -> {args.out}")
    return 0


def _read_embeddings_jsonl(path) -> list:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            items.append((
                ChunkRef.parse(obj["ref"]),
                EmbeddingVector(
                    values=obj["values"], dim=obj["dim"], model_id=obj["model_id"]
                ),
            ))
    return items


def cmd_index_build(args) -> int:
    if bool(args.embeddings) == bool(args.chunks):
        raise InvalidConfig("index build needs exactly one of --embeddings/--chunks")
    if args.embeddings:
        items = _read_embeddings_jsonl(args.embeddings)
    else:
        if not (args.config and args.backend):
            raise InvalidConfig("--chunks input needs --config and --backend")
        config = _config_from_args(args)
        provider = _provider_for_label(config, args.backend)
        items = [
            (ChunkRef(c.doc_id, c.chunk_index, c.method.token),
             provider.embed_text(c.text))
            for c in read_chunks(args.chunks)
        ]
    index = build(items)
    save(index, args.out)
    print(f"index of {len(items)} vectors (dim {index.dim}) -> {args.out}")
    return 0


def cmd_index_query(args) -> int:
    from ragmark.vecindex import load, query

    config = _config_from_args(args)
    provider = _provider_for_label(config, args.backend)
    index = load(args.index)
    hits = query(index, provider.embed_text(args.q), args.k)
    for hit in hits:
        print(f"{hit.ref.serialize()}\t{hit.score!r}")
    return 0


def cmd_gen_qa(args) -> int:
    config = _config_from_args(args)
    docs = load_corpus(load_manifest(config.manifest_path))
    doc_types = {d.id: d.doc_type for d in docs}
    chat = make_chat_provider(config.chat)
    pairs = []
    for chunks_path in args.chunks:
        selected = select_chunks(read_chunks(chunks_path), config.gen)
        for chunk in selected:
            pairs.append(
                generate_qa(chat, chunk, doc_types[chunk.doc_id],
                            config.gen.template_id)
            )
    write_dataset(pairs, args.out)
    print(f"{len(pairs)} question/answer pairs -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    from ragmark.analysis import EvalRecord, write_records
    from ragmark.qagen import read_dataset
    from ragmark.vecindex import query

    config = _config_from_args(args)
    chat = make_chat_provider(config.chat)
    chunks = []
    for chunks_path in args.chunks:
        chunks.extend(read_chunks(chunks_path))
    by_method: dict[SplittingMethod, list] = {}
    for c in chunks:
        by_method.setdefault(c.method, []).append(c)
    chunk_text = {
        ChunkRef(c.doc_id, c.chunk_index, c.method.token): c.text for c in chunks
    }
    pairs = read_dataset(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [args.backend] if args.backend else [s.label for s in config.backends]
    for label in labels:
        provider = _provider_for_label(config, label)
        indexes = {
            method: build([
                (ChunkRef(c.doc_id, c.chunk_index, method.token),
                 provider.embed_text(c.text))
                for c in method_chunks
            ])
            for method, method_chunks in by_method.items()
        }
        records = []
        for pair in pairs:
            hits = query(
                indexes[pair.method], provider.embed_text(pair.question),
                config.retrieval_k,
            )
            answer = generate_answer(
                chat, pair.question, [(h.ref, chunk_text[h.ref]) for h in hits]
            )
            scores = composite_score(
                answer, pair.reference_answer, config.weights,
                provider=provider, mode=config.bert_mode,
            )
            records.append(EvalRecord(
                qa_id=pair.qa_id, doc_type=pair.doc_type, method=pair.method,
                backend_label=label, retrieved=tuple(h.ref for h in hits),
                generated_answer=answer, scores=scores,
            ))
        path = out_dir / f"records_{label}.csv"
        write_records(records, path)
        print(f"{len(records)} records -> {path}")
    return 0


def _print_table(header, rows) -> None:
    print("\t".join(header))
    for row in rows:
        print("\t".join(str(cell) for cell in row))


def _grouped(records, key) -> GroupedScores:
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(key(rec), []).append(rec.scores.final)
    return GroupedScores.from_pairs(sorted(groups.items()))


def cmd_stats(args) -> int:
    records = read_records(args.records)
    if not records:
        raise ValidationError(f"{args.records} holds no records")
    label = records[0].backend_label
    if args.by == "method":
        data = _grouped(records, lambda r: r.method.token)
        source = f"{label} Splitting Method"
    else:
        data = _grouped(records, lambda r: r.doc_type.label)
        source = f"{label} Document Type"
    anova = one_way_anova(data)
    _print_table(ANOVA_COLUMNS, [
        [source, repr(anova.ss_between), anova.df_between,
         repr(anova.f_value), repr(anova.p_value)],
        [f"{label} Residual", repr(anova.ss_within), anova.df_within,
         "N/A", "N/A"],
    ])
    print()
    rows = tukey_hsd(data, alpha=args.alpha)
    _print_table(TUKEY_COLUMNS, [
        [r.group1, r.group2, repr(r.mean_diff), repr(r.p_adj),
         repr(r.lower), repr(r.upper), r.reject]
        for r in rows
    ])
    return 0


GNUPLOT_SCRIPT = """\
set datafile separator comma
set terminal pngcairo size 900,540
set key autotitle columnhead

set output 'hist_final.png'
set style data histogram
set style fill solid 0.6
plot 'hist_final.csv' using 5:xtic(3) title 'final score bins'

set output 'bars_doctype.png'
plot 'bars_doctype.csv' using 4:xtic(2) title 'mean final by document type'

set output 'bars_method.png'
plot 'bars_method.csv' using 4:xtic(2) title 'mean final by splitting method'
"""


def cmd_report(args) -> int:
    from ragmark.pipeline import TABLE4_BASE_COLUMNS, _table4_rows, _write_csv
    from ragmark.analysis import TABLE5_COLUMNS
    from ragmark.qagen import read_dataset

    records = []
    for path in args.records:
        records.extend(read_records(path))
    if not records:
        raise ValidationError("no evaluation records given")
    labels = sorted({r.backend_label for r in records})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    differentials = rank_differentials(records, args.per_backend_top)
    header = (*TABLE4_BASE_COLUMNS, *(
        col for lb in labels
        for col in (f"Final_Avg_Score_{lb}", f"Score_Diff_{lb}")
    ))
    _write_csv(out_dir / "table4.csv", header, _table4_rows(differentials, labels))
    chunks = []
    for chunks_path in args.chunks:
        chunks.extend(read_chunks(chunks_path))
    dataset = read_dataset(args.dataset)
    t5 = table5_report(differentials, chunks, dataset, target=args.feature_target)
    _write_csv(out_dir / "table5.csv", TABLE5_COLUMNS, [
        [doc_type, str(size), str(freq), repr(complexity)]
        for doc_type, size, freq, complexity in t5
    ])
    print(f"table4.csv and table5.csv -> {out_dir}")
    if args.gnuplot:
        (out_dir / "figures.gp").write_text(GNUPLOT_SCRIPT, encoding="utf-8")
        print(f"gnuplot script -> {out_dir / 'figures.gp'}")
    return 0


def cmd_run(args) -> int:
    config = _config_from_args(args)
    result = run_pipeline(config)
    print(f"output directory: {result.output_dir}")
    print(f"qa pairs: {result.qa_count}")
    for label, count in result.record_counts.items():
        print(f"records[{label}]: {count}")
    print(f"quarantined: {result.quarantine_count}")
    return 4 if result.quarantine_count else 0


def cmd_score(args) -> int:
    weights = MetricWeights.parse(args.weights) if args.weights else MetricWeights()
    try:
        mode = BertMode.parse(args.bert_mode)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    from ragmark.embeddings import MockEmbeddingProvider

    provider = MockEmbeddingProvider(dim=args.dim, seed=args.seed)
    scores = composite_score(
        args.candidate, args.reference, weights, provider=provider, mode=mode
    )
    print(f"sm: {scores.sm!r}")
    print(f"bleu: {scores.bleu!r}")
    print(f"meteor: {scores.meteor!r}")
    print(f"bert: {scores.bert!r}")
    print(f"final: {scores.final!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragmark",
        description="Retrieval answer-quality benchmark harness",
    )
    parser.add_argument("--version", action="version", version=f"ragmark {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log stage progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus manifest and summarize it")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="split a corpus into chunks with one method")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True, help="RCS or TTS")
    p.add_argument("--chunk-size", type=int, required=True)
    p.add_argument("--overlap", type=int, required=True)
    p.add_argument("--separators", default=None,
                   help=r"comma-separated list for RCS; \n escapes allowed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed", help="embed a chunks file with one backend")
    p.add_argument("--config", required=True)
    p.add_argument("--backend", required=True, help="backend_label from the config")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index", help="build or query a saved vector index")
    index_sub = p.add_subparsers(dest="index_command", required=True)
    pb = index_sub.add_parser("build", help="build and save an index")
    pb.add_argument("--embeddings", default=None, help="JSONL from the embed step")
    pb.add_argument("--chunks", default=None, help="chunks JSONL to embed directly")
    pb.add_argument("--config", default=None)
    pb.add_argument("--backend", default=None, help="backend_label from the config")
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_index_build)
    pq = index_sub.add_parser("query", help="embed a query and search an index")
    pq.add_argument("--index", required=True)
    pq.add_argument("--q", required=True)
    pq.add_argument("--k", type=int, default=4)
    pq.add_argument("--config", required=True)
    pq.add_argument("--backend", required=True)
    pq.set_defaults(func=cmd_index_query)

    p = sub.add_parser("gen-qa", help="generate the question/answer dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--chunks", action="append", required=True,
                   help="chunks JSONL; repeat per splitting method")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("eval", help="retrieve, answer, and score a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--chunks", action="append", required=True)
    p.add_argument("--backend", default=None,
                   help="evaluate only this backend_label")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="ANOVA and pairwise comparison tables")
    p.add_argument("--records", required=True)
    p.add_argument("--by", choices=("doc_type", "method"), default="doc_type")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="differential and feature tables from records")
    p.add_argument("--records", action="append", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--chunks", action="append", required=True)
    p.add_argument("--per-backend-top", type=int, default=5)
    p.add_argument("--feature-target", choices=("chunk", "generated", "reference"),
                   default="chunk")
    p.add_argument("--gnuplot", action="store_true",
                   help="also write a gnuplot script for the figures")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run the full experiment pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", dest="output_dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--retrieval-k", dest="retrieval_k", type=int, default=None)
    p.add_argument("--weights", default=None, help="sm,bleu,meteor,bert")
    p.add_argument("--bert-mode", dest="bert_mode", default=None,
                   help="token or sentence")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score one candidate against one reference")
    p.add_argument("--candidate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--weights", default=None, help="sm,bleu,meteor,bert")
    p.add_argument("--bert-mode", dest="bert_mode", default="token")
    p.add_argument("--dim", type=int, default=64, help="mock embedding dimension")
    p.add_argument("--seed", type=int, default=0, help="mock embedding seed")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProviderError, ReplayMiss, MalformedResponse) as exc:
        print(f"service error: {exc}", file=sys.stderr)
        return 3
    except RagmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
