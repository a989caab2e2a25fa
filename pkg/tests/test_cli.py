from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from medner.cli import main, read_predictions, run_pipeline, stage_seed
from medner.errors import ConfigInvalid

DEMO = Path(__file__).resolve().parent.parent / "src" / "medner" / "data" / "pipeline_demo.json"


def _hashes(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_stage_seeds_are_named_streams():
    assert stage_seed(0, "ner") == stage_seed(0, "ner")
    assert stage_seed(0, "ner") != stage_seed(0, "rel")
    assert stage_seed(0, "ner") != stage_seed(1, "ner")


def test_missing_corpus_path_fails_before_any_stage(tmp_path):
    cfg = {"corpus": {"annotated": str(tmp_path / "nope"), "unannotated": str(tmp_path / "nope")}}
    with pytest.raises(ConfigInvalid):
        run_pipeline(cfg, tmp_path / "run")
    assert not (tmp_path / "run").exists()


def test_unknown_pipeline_key(tmp_path):
    with pytest.raises(ConfigInvalid):
        run_pipeline({"colour": "blue"}, tmp_path / "run")


def test_exit_codes(tmp_path, capsys):
    assert main(["run-pipeline", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ner": {"archs": ["rnn"], "overrides": {"rnn": {"d": 2.0}}}}))
    assert main(["run-pipeline", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    broken = tmp_path / "pred.jsonl"
    broken.write_text("{not json}\n")
    gold = tmp_path / "gold"
    assert main(["gen-synthetic", "--out", str(gold), "--n-annotated", "2", "--n-unannotated", "0"]) == 0
    assert main(["evaluate", "--gold", str(gold / "annotated"), "--pred", str(broken),
                 "--report", str(tmp_path / "t7.csv")]) == 3
    assert "error:" in capsys.readouterr().err


def test_pipeline_is_byte_reproducible(tmp_path):
    cfg = json.loads(DEMO.read_text())
    run_pipeline(cfg, tmp_path / "a")
    run_pipeline(cfg, tmp_path / "b")
    a, b = _hashes(tmp_path / "a"), _hashes(tmp_path / "b")
    assert a == b
    for name in ("table4.csv", "table6.csv", "table7.csv", "tsne.csv", "relations.csv"):
        assert f"reports/{name}" in a
    manifest = json.loads((tmp_path / "a" / "manifests" / "ner.json").read_text())
    assert manifest["outputs"]["reports/table7.csv"] == a["reports/table7.csv"]


def test_subcommands_end_to_end(tmp_path):
    run = lambda *argv: main([*map(str, argv)])  # noqa: E731
    corpus = tmp_path / "corpus"
    assert run("gen-synthetic", "--out", corpus, "--n-annotated", "12", "--n-unannotated", "10", "--seed", 1) == 0
    assert run("preprocess", "--in", corpus / "annotated", "--out", tmp_path / "pre",
               "--vocab-report", tmp_path / "vocab.json") == 0
    assert json.loads((tmp_path / "vocab.json").read_text())["documents"] == 12
    for algo in ("cbow", "csg"):
        assert run("train-embeddings", "--in", corpus / "unannotated", "--train", corpus / "annotated",
                   "--algo", algo, "--dim", 8, "--epochs", 1, "--out", tmp_path / f"{algo}.txt") == 0
    assert run("eval-embeddings", "--cbow", tmp_path / "cbow.txt", "--csg", tmp_path / "csg.txt",
               "--train", corpus / "annotated", "--intrinsic", "--report", tmp_path / "t4.csv") == 0
    sweep = tmp_path / "sweep.json"
    sweep.write_text(json.dumps({"points": [{"algorithm": "CBOW", "l": 1, "activation": "tanh", "d": 0.0, "r": 0.01}],
                                 "n_train": 100, "n_test": 20, "h": [4], "e": 1}))
    assert run("eval-embeddings", "--cbow", tmp_path / "cbow.txt", "--csg", tmp_path / "csg.txt",
               "--train", corpus / "annotated", "--extrinsic", "--sweep", sweep, "--report", tmp_path / "t6.csv") == 0
    cfg = tmp_path / "ner.json"
    cfg.write_text(json.dumps({"h": [6], "w": 2, "e": 1}))
    assert run("train-ner", "--arch", "rnn", "--config", cfg, "--embeddings", tmp_path / "cbow.txt",
               "--train", corpus / "annotated", "--out", tmp_path / "ner.bin") == 0
    assert run("predict", "--model", tmp_path / "ner.bin", "--in", corpus / "annotated",
               "--out", tmp_path / "pred.jsonl") == 0
    for line in (tmp_path / "pred.jsonl").read_text().splitlines():
        assert set(json.loads(line)) == {"doc_id", "line", "start", "end", "label", "score"}
    read_predictions(tmp_path / "pred.jsonl")
    assert run("evaluate", "--gold", corpus / "annotated", "--pred", tmp_path / "pred.jsonl",
               "--report", tmp_path / "t7.csv") == 0
    assert (tmp_path / "t7.csv").read_text().startswith("model,field,precision")
    rcfg = tmp_path / "rel.json"
    rcfg.write_text(json.dumps({"hidden": 4, "e": 1}))
    assert run("train-rel", "--arch", "encdec", "--attention", "luong", "--config", rcfg,
               "--embeddings", tmp_path / "cbow.txt", "--train", corpus / "annotated", "--out", tmp_path / "rel.bin") == 0
    assert run("extract-rel", "--model", tmp_path / "rel.bin", "--docs", corpus / "annotated",
               "--pred", tmp_path / "pred.jsonl", "--out", tmp_path / "rel.jsonl") == 0
    for line in (tmp_path / "rel.jsonl").read_text().splitlines():
        assert set(json.loads(line)) == {"doc_id", "medication_span", "field", "tokens"}
    entries = tmp_path / "entries.jsonl"
    first = sorted((corpus / "annotated").glob("*.txt"))[0].stem
    entries.write_text(json.dumps({"doc_id": first, "medication_span": [1, 0, 0]}) + "\n")
    assert run("extract-rel", "--model", tmp_path / "rel.bin", "--docs", corpus / "annotated",
               "--entries", entries, "--out", tmp_path / "rel2.jsonl", "--precision", 32) == 0
