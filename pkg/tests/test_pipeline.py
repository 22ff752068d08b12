"""Experiment config parsing and the end-to-end pipeline run."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ragmark.chat import ChatConfig
from ragmark.embeddings import ProviderKind
from ragmark.errors import (
    EmptyField,
    EmptyInput,
    InvalidConfig,
    InvalidManifest,
)
from ragmark.metrics import BertMode, MetricWeights
from ragmark.pipeline import (
    BackendSpec,
    ExperimentConfig,
    generate_answer,
    load_experiment_config,
    run_pipeline,
)
from ragmark.qagen import GenConfig
from ragmark.splitters import SplitterConfig, SplittingMethod
from ragmark.vecindex import ChunkRef

ARTICLE = (
    "Urban gardens change how cities breathe. Rooftop plots catch rain "
    "that would otherwise flood the drains below. Volunteers measure "
    "soil temperature every morning before the markets open. The harvest "
    "feeds three neighborhood kitchens through the winter months. "
    "Planners now require green cover on every new warehouse roof. "
    "Sensors log humidity so the irrigation valves open only when needed. "
    "A modest plot can cool the surrounding block by two degrees. "
    "The council publishes the yield figures in an open ledger each year."
)

TEXTBOOK = (
    "A heat engine converts thermal energy into mechanical work. The "
    "working fluid absorbs heat from the hot reservoir and rejects the "
    "remainder to the cold reservoir. Efficiency is bounded by the "
    "temperature ratio of the two reservoirs. Real engines lose extra "
    "work to friction and unrestrained expansion. Designers raise the "
    "boiler pressure to push the cycle closer to its ideal limit. "
    "Regeneration preheats the feed water using steam bled from the "
    "turbine. Each stage of improvement trades capital cost against fuel "
    "saved over the plant lifetime."
)

NOVEL = (
    "Mara counted the lighthouse flashes while the tide crept over the "
    "causeway. Her brother had promised to return before the third "
    "high water. The letters in the tin box smelled of salt and old "
    "tobacco. She read them again under the storm lantern, tracing the "
    "route he had sketched along the margin. By morning the gulls were "
    "quarreling on the slipway and the boat was still missing. The "
    "harbourmaster offered tea and said nothing useful. Mara packed the "
    "charts herself and waited for the wind to turn."
)


def make_corpus(root: Path) -> Path:
    corpus = root / "corpus"
    corpus.mkdir()
    (corpus / "article.txt").write_text(ARTICLE, encoding="utf-8")
    (corpus / "textbook.txt").write_text(TEXTBOOK, encoding="utf-8")
    (corpus / "novel.txt").write_text(NOVEL, encoding="utf-8")
    manifest = [
        {"id": "garden", "doc_type": "article", "path": "article.txt",
         "title": "Gardens"},
        {"id": "engine", "doc_type": "textbook", "path": "textbook.txt",
         "title": "Engines"},
        {"id": "tide", "doc_type": "novel", "path": "novel.txt",
         "title": "Tides"},
    ]
    (corpus / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return corpus / "manifest.json"


def base_config(root: Path, **chat_extra) -> dict:
    return {
        "manifest": "corpus/manifest.json",
        "output_dir": str(root / "out"),
        "seed": 3,
        "retrieval_k": 2,
        "splitters": {
            "RCS": {"chunk_size": 220, "overlap": 40},
            "TTS": {"chunk_size": 40, "overlap": 8},
        },
        "backends": [
            {"backend_label": "B1", "kind": "mock", "model_id": "mock-b1",
             "dim": 48, "seed": 5},
            {"backend_label": "B2", "kind": "mock", "model_id": "mock-b2",
             "dim": 32, "seed": 9},
        ],
        "chat": {"kind": "stub", "model_id": "stub-chat",
                 "temperature": 0.0, **chat_extra},
        "qa": {"per_doc_count": 2, "min_chunk_words": 12},
        "per_backend_top": 2,
    }


def write_config(root: Path, data: dict, name: str = "config.json") -> Path:
    path = root / name
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def workspace(tmp_path):
    make_corpus(tmp_path)
    return tmp_path


# ---------------------------------------------------------------- config


def test_load_experiment_config_fields(workspace):
    path = write_config(workspace, base_config(workspace))
    config = load_experiment_config(path)
    assert config.manifest_path == str(workspace / "corpus/manifest.json")
    assert config.seed == 3
    assert config.retrieval_k == 2
    assert config.rcs.chunk_size == 220 and config.rcs.overlap == 40
    assert config.tts.chunk_size == 40 and config.tts.overlap == 8
    assert [b.label for b in config.backends] == ["B1", "B2"]
    assert config.backends[0].provider.kind is ProviderKind.DETERMINISTIC_MOCK
    assert config.backends[0].provider.mock_dim == 48
    assert config.chat.kind == "stub"
    assert config.gen.per_doc_count == 2
    assert config.gen.seed == 3  # inherits the run seed
    assert config.weights == MetricWeights()
    assert config.bert_mode is BertMode.TOKEN_GREEDY


def test_load_experiment_config_weight_forms(workspace):
    data = base_config(workspace)
    data["weights"] = [0.4, 0.3, 0.2, 0.1]
    config = load_experiment_config(write_config(workspace, data, "w1.json"))
    assert config.weights == MetricWeights(0.4, 0.3, 0.2, 0.1)

    data["weights"] = "0.4,0.3,0.2,0.1"
    config = load_experiment_config(write_config(workspace, data, "w2.json"))
    assert config.weights == MetricWeights(0.4, 0.3, 0.2, 0.1)

    data["weights"] = [0.5, 0.5]
    with pytest.raises(InvalidConfig, match="weights"):
        load_experiment_config(write_config(workspace, data, "w3.json"))


def test_load_experiment_config_rejects_unknown_keys(workspace):
    data = base_config(workspace)
    data["retreival_k"] = 5  # typo must not be silently dropped
    del data["retrieval_k"]
    with pytest.raises(InvalidConfig, match="retreival_k"):
        load_experiment_config(write_config(workspace, data))


def test_load_experiment_config_rejects_duplicate_labels(workspace):
    data = base_config(workspace)
    data["backends"][1]["backend_label"] = "B1"
    with pytest.raises(InvalidConfig, match="unique"):
        load_experiment_config(write_config(workspace, data))


def test_load_experiment_config_file_problems(tmp_path):
    with pytest.raises(InvalidConfig, match="not found"):
        load_experiment_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(InvalidConfig, match="valid JSON"):
        load_experiment_config(bad)
    array = tmp_path / "array.json"
    array.write_text("[1,2]", encoding="utf-8")
    with pytest.raises(InvalidConfig, match="object"):
        load_experiment_config(array)


def test_load_experiment_config_requires_manifest_and_backends(workspace):
    data = base_config(workspace)
    del data["manifest"]
    with pytest.raises(InvalidConfig, match="manifest"):
        load_experiment_config(write_config(workspace, data, "m.json"))
    data = base_config(workspace)
    data["backends"] = []
    with pytest.raises(InvalidConfig, match="backend"):
        load_experiment_config(write_config(workspace, data, "b.json"))
    data = base_config(workspace)
    data["backends"][0]["kind"] = "gpu"
    with pytest.raises(InvalidConfig, match="gpu"):
        load_experiment_config(write_config(workspace, data, "k.json"))


def test_load_experiment_config_overrides_win(workspace):
    path = write_config(workspace, base_config(workspace))
    config = load_experiment_config(
        path, overrides={"output_dir": "elsewhere", "seed": None}
    )
    assert config.output_dir == "elsewhere"
    assert config.seed == 3  # None override is ignored


def test_load_experiment_config_resolves_replay_relative_to_config(workspace):
    data = base_config(workspace, replay_path="transcript.jsonl")
    data["chat"]["kind"] = "replay"
    (workspace / "transcript.jsonl").write_text("", encoding="utf-8")
    config = load_experiment_config(write_config(workspace, data, "r.json"))
    assert config.chat.replay_path == str(workspace / "transcript.jsonl")


def test_experiment_config_validation(workspace):
    rcs = SplitterConfig(method=SplittingMethod.RECURSIVE_CHARACTER,
                         chunk_size=200, overlap=20)
    tts = SplitterConfig(method=SplittingMethod.TOKEN_TEXT,
                         chunk_size=40, overlap=8)
    spec = BackendSpec(label="B1", provider=__import__(
        "ragmark.embeddings", fromlist=["ProviderConfig"]
    ).ProviderConfig(kind=ProviderKind.DETERMINISTIC_MOCK, model_id="m",
                     mock_dim=16, mock_seed=1))
    kwargs = dict(
        manifest_path="m.json", output_dir="o", rcs=rcs, tts=tts,
        backends=(spec,), chat=ChatConfig(kind="stub", model_id="s"),
        gen=GenConfig(per_doc_count=1, min_chunk_words=5, seed=0),
    )
    ExperimentConfig(**kwargs)  # valid
    with pytest.raises(InvalidConfig, match="wrong method"):
        ExperimentConfig(**{**kwargs, "rcs": tts, "tts": rcs})
    with pytest.raises(InvalidConfig, match="retrieval_k"):
        ExperimentConfig(**{**kwargs, "retrieval_k": 0})
    with pytest.raises(InvalidConfig, match="backend"):
        ExperimentConfig(**{**kwargs, "backends": ()})
    with pytest.raises(InvalidConfig, match="plain token"):
        BackendSpec(label="has space", provider=spec.provider)


# ---------------------------------------------------------------- answers


class ScriptedChat:
    model_id = "scripted"
    temperature = 0.0

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, messages):
        self.prompts.append(messages[-1]["content"])
        return self.replies.pop(0)


def test_generate_answer_prompt_layout():
    chat = ScriptedChat(["The tide returns at dawn."])
    answer = generate_answer(chat, "When does the tide return?", [
        (ChunkRef("tide", 0, "RCS"), "The tide returns at dawn."),
        (ChunkRef("tide", 3, "TTS"), "Gulls quarrel on the slipway."),
    ])
    assert answer == "The tide returns at dawn."
    prompt = chat.prompts[0]
    assert prompt.startswith("Context:\n")
    assert "[source 1: tide:0:RCS] The tide returns at dawn." in prompt
    assert "[source 2: tide:3:TTS] Gulls quarrel on the slipway." in prompt
    assert prompt.index("[source 1:") < prompt.index("[source 2:")
    assert "Question: When does the tide return?" in prompt
    assert prompt.rstrip().endswith("Answer using only the context above.")


def test_generate_answer_rejects_empty():
    with pytest.raises(EmptyInput):
        generate_answer(ScriptedChat(["x"]), "q", [])
    with pytest.raises(EmptyField):
        generate_answer(ScriptedChat(["   "]), "q",
                        [(ChunkRef("d", 0, "RCS"), "text")])


# ---------------------------------------------------------------- full runs

EXPECTED_FILES = [
    "chunks_RCS.jsonl", "chunks_TTS.jsonl", "eval_ds.csv",
    "records_B1.csv", "records_B2.csv",
    "anova.csv", "anova_method.csv", "tukey_B1.csv", "tukey_B2.csv",
    "split_compare.csv", "hist_final.csv", "bars_doctype.csv",
    "bars_method.csv", "table4.csv", "table5.csv", "run_meta.json",
]


def run_once(workspace: Path, out_name: str, **chat_extra):
    data = base_config(workspace, **chat_extra)
    data["output_dir"] = str(workspace / out_name)
    path = write_config(workspace, data, f"{out_name}.json")
    return run_pipeline(load_experiment_config(path))


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_run_pipeline_produces_all_artifacts(workspace):
    result = run_once(workspace, "run1")
    assert result.quarantine_count == 0
    assert result.qa_count > 0
    assert set(result.record_counts) == {"B1", "B2"}
    for name in EXPECTED_FILES:
        assert (result.output_dir / name).exists(), name
    assert not (result.output_dir / "quarantine").exists()

    meta = json.loads((result.output_dir / "run_meta.json").read_text())
    assert meta["counts"]["qa_pairs"] == result.qa_count
    assert meta["counts"]["records"] == result.record_counts
    assert meta["counts"]["quarantined"] == 0
    assert meta["counts"]["documents"] == 3
    assert meta["seed"] == 3
    assert meta["runtime"]["kernel_backend"] in ("compiled", "pure")
    assert meta["baseline_kind"] == "mean(backend_label,doc_type)"


def test_run_pipeline_conserves_every_pair(workspace):
    result = run_once(workspace, "run_cons")
    for label, count in result.record_counts.items():
        assert count == result.qa_count  # nothing quarantined here
    # dataset rows match the run's pair count
    rows = (result.output_dir / "eval_ds.csv").read_text().splitlines()
    assert len(rows) - 1 == result.qa_count


def test_run_pipeline_reruns_byte_identical(workspace):
    a = run_once(workspace, "run_a")
    b = run_once(workspace, "run_b")
    bytes_a = tree_bytes(a.output_dir)
    bytes_b = tree_bytes(b.output_dir)
    assert set(bytes_a) == set(bytes_b)
    for name in bytes_a:
        assert bytes_a[name] == bytes_b[name], name


def test_run_pipeline_eval_quarantine_conserves(workspace):
    recorded = run_once(workspace, "run_rec",
                        record_path=str(workspace / "full.jsonl"))
    assert recorded.quarantine_count == 0
    lines = (workspace / "full.jsonl").read_text().splitlines()
    assert len(lines) > recorded.qa_count  # QA prompts plus answer prompts
    # drop the last transcript entry: an answer prompt from the eval stage
    (workspace / "cut.jsonl").write_text(
        "\n".join(lines[:-1]) + "\n", encoding="utf-8"
    )
    data = base_config(workspace)
    data["chat"] = {"kind": "replay", "model_id": "stub-chat",
                    "temperature": 0.0, "replay_path": "cut.jsonl"}
    data["output_dir"] = str(workspace / "run_cut")
    result = run_pipeline(load_experiment_config(
        write_config(workspace, data, "cut.json")
    ))
    assert result.quarantine_count >= 1
    entries = [
        json.loads(line) for line in
        (result.output_dir / "quarantine/quarantine.jsonl")
        .read_text().splitlines()
    ]
    assert all(e["stage"] == "eval" for e in entries)
    assert all(e["error_type"] == "ReplayMiss" for e in entries)
    # conservation: every pair lands in records or quarantine, per backend
    per_backend = {label: 0 for label in result.record_counts}
    for e in entries:
        per_backend[e["backend_label"]] += 1
    for label, quarantined in per_backend.items():
        assert result.record_counts[label] + quarantined == result.qa_count


def test_run_pipeline_genqa_quarantine_shrinks_dataset(workspace):
    recorded = run_once(workspace, "run_rec2",
                        record_path=str(workspace / "full2.jsonl"))
    lines = (workspace / "full2.jsonl").read_text().splitlines()
    # the first transcript entry is a question-generation prompt
    (workspace / "cut2.jsonl").write_text(
        "\n".join(lines[1:]) + "\n", encoding="utf-8"
    )
    data = base_config(workspace)
    data["chat"] = {"kind": "replay", "model_id": "stub-chat",
                    "temperature": 0.0, "replay_path": "cut2.jsonl"}
    data["output_dir"] = str(workspace / "run_cut2")
    result = run_pipeline(load_experiment_config(
        write_config(workspace, data, "cut2.json")
    ))
    assert result.qa_count == recorded.qa_count - 1
    entries = [
        json.loads(line) for line in
        (result.output_dir / "quarantine/quarantine.jsonl")
        .read_text().splitlines()
    ]
    genqa = [e for e in entries if e["stage"] == "gen-qa"]
    assert len(genqa) == 1
    assert genqa[0]["error_type"] == "ReplayMiss"


def test_run_pipeline_stage_errors_name_the_stage(workspace):
    data = base_config(workspace)
    data["manifest"] = "corpus/missing.json"
    data["output_dir"] = str(workspace / "run_bad")
    config = load_experiment_config(write_config(workspace, data, "bad.json"))
    with pytest.raises(InvalidManifest, match="stage ingest"):
        run_pipeline(config)
