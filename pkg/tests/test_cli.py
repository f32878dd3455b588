import json

import pytest

from hint.cli import run
from hint.corpus import write_jsonl
from hint.synthetic import separable_corpus

CONFIG = """
[data]
train = "train.jsonl"
val = "val.jsonl"
[preprocess]
embed_dim = 16
[model]
embed_dim = 16
num_topics = 4
node_hidden = 16
node_dim = 8
clf_hidden = 16
[train]
learning_rate = 5e-3
epochs = 2
batch_size = 8
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    rows = separable_corpus(40, seed=3)
    write_jsonl(d / "train.jsonl", rows[:30])
    write_jsonl(d / "val.jsonl", rows[30:38])
    write_jsonl(d / "docs.jsonl", rows[38:])
    (d / "cfg.toml").write_text(CONFIG)
    assert run(["train", "--config", str(d / "cfg.toml"), "--output", str(d / "m.bin")]) == 0
    return d


def test_train_writes_checkpoint_and_log(workdir):
    assert (workdir / "m.bin").stat().st_size > 0
    lines = (workdir / "m.bin.log.jsonl").read_text().splitlines()
    assert len(lines) == 2 and "val_loss" in json.loads(lines[0])


def test_training_twice_is_byte_identical(workdir):
    assert run(["train", "--config", str(workdir / "cfg.toml"), "--output", str(workdir / "m2.bin")]) == 0
    assert (workdir / "m2.bin").read_bytes() == (workdir / "m.bin").read_bytes()


def test_predict_and_interpret(workdir):
    common = ["--checkpoint", str(workdir / "m.bin"), "--input", str(workdir / "docs.jsonl")]
    assert run(["predict", *common, "--output", str(workdir / "p1.jsonl")]) == 0
    assert run(["predict", *common, "--output", str(workdir / "p2.jsonl")]) == 0
    p1 = (workdir / "p1.jsonl").read_bytes()
    assert p1 == (workdir / "p2.jsonl").read_bytes()
    rows = [json.loads(x) for x in p1.splitlines()]
    assert len(rows) == 2 and abs(sum(rows[0]["probs"]) - 1) < 1e-6
    assert run(["interpret", *common, "--format", "html", "--output", str(workdir / "html")]) == 0
    assert len(list((workdir / "html").glob("*.html"))) == 2
    assert run(["interpret", *common, "--output", str(workdir / "json")]) == 0
    reports = sorted((workdir / "json").glob("*.json"))
    assert len(reports) == 2 and json.loads(reports[0].read_text())["sentences"]


def test_evaluate_metrics(workdir):
    out = workdir / "metrics.json"
    code = run(["evaluate", "--checkpoint", str(workdir / "m.bin"), "--input", str(workdir / "val.jsonl"),
                "--metric", "accuracy,prf,npmi,completeness,removal", "--bins", "1,5,10,20,50",
                "--ks", "1,2", "--output", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert [row["bin"] for row in data["faithfulness"]] == [1, 5, 10, 20, 50]
    assert 0 <= data["accuracy"] <= 1 and [p["k"] for p in data["removal"]["points"]] == [0, 1, 2]
    assert data["coherence"]["npmi"]["scores"]


def test_usage_errors_exit_1_without_side_effects(workdir, tmp_path, capsys):
    assert run([]) == 1
    assert run(["train"]) == 1
    assert "--config" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text('[train]\nepochs = 0\n[data]\ntrain = "x.jsonl"\n')
    assert run(["train", "--config", str(bad), "--output", str(tmp_path / "o.bin")]) == 1
    assert not (tmp_path / "o.bin").exists()
    assert run(["evaluate", "--checkpoint", str(workdir / "m.bin"), "--input", str(workdir / "val.jsonl"),
                "--metric", "nonsense", "--output", str(tmp_path / "m.json")]) == 1
    assert not (tmp_path / "m.json").exists()


def test_runtime_error_exit_2(workdir, tmp_path):
    broken = tmp_path / "broken.bin"
    broken.write_bytes(b"garbage")
    assert run(["predict", "--checkpoint", str(broken), "--input", str(workdir / "docs.jsonl"),
                "--output", str(tmp_path / "p.jsonl")]) == 2


def test_preprocess_uses_cache_dir(workdir, tmp_path, monkeypatch):
    monkeypatch.setenv("HINT_CACHE_DIR", str(tmp_path / "cache"))
    assert run(["preprocess", "--config", str(workdir / "cfg.toml")]) == 0
    entries = list((tmp_path / "cache").iterdir())
    assert len(entries) == 1 and (entries[0] / "vocab.json").exists()
    assert run(["train", "--config", str(workdir / "cfg.toml"), "--output", str(tmp_path / "c.bin")]) == 0
    assert (tmp_path / "c.bin").read_bytes() == (workdir / "m.bin").read_bytes()
