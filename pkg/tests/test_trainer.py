import dataclasses
import json

import numpy as np
import pytest
import torch

from conftest import SMALL_MODEL, SMALL_PRE, SMALL_TRAIN
from hint.config import TrainConfig, config_from_dict, load_config
from hint.errors import ConfigError, EmptyDocument, NumericalError
from hint.trainer import (evaluate_docs, load_checkpoint, predict, predict_many, save_checkpoint, train,
                          train_runs)


def test_train_logs_and_keeps_best_epoch(small_data, tmp_path):
    corpus, train_docs, test_docs = small_data
    log_path = tmp_path / "log.jsonl"
    res = train(train_docs, corpus, SMALL_MODEL, SMALL_TRAIN, test_docs, log_path=log_path, eval_train=True)
    lines = [json.loads(x) for x in log_path.read_text().splitlines()]
    assert lines == res.log and len(lines) == SMALL_TRAIN.epochs
    for key in ("train_loss", "train_l_c", "train_elbo", "train_r1", "train_r2", "val_loss", "val_accuracy",
                "train_accuracy"):
        assert key in lines[0]
    best = max(range(len(lines)), key=lambda i: (lines[i]["val_accuracy"], -i))
    assert res.best_epoch == best
    assert evaluate_docs(res.model, test_docs, corpus.tfidf)["accuracy"] == pytest.approx(res.best_val_accuracy)


def test_training_is_deterministic(small_data):
    corpus, train_docs, _ = small_data
    a = train(train_docs, corpus, SMALL_MODEL, SMALL_TRAIN)
    b = train(train_docs, corpus, SMALL_MODEL, SMALL_TRAIN)
    assert a.log == b.log
    for p, q in zip(a.model.state_dict().values(), b.model.state_dict().values()):
        assert torch.equal(p, q)


def test_loss_decreases_on_toy_data(small_data):
    corpus, train_docs, _ = small_data
    res = train(train_docs, corpus, SMALL_MODEL, dataclasses.replace(SMALL_TRAIN, epochs=4))
    assert res.log[-1]["train_loss"] < res.log[0]["train_loss"]


def test_nan_loss_raises_with_last_good_state(small_data):
    corpus, train_docs, _ = small_data
    bad = dataclasses.replace(SMALL_TRAIN, learning_rate=1e30, epochs=5)
    with pytest.raises(NumericalError) as info:
        train(train_docs, corpus, SMALL_MODEL, bad)
    assert info.value.checkpoint is not None


def test_train_rejects_bad_inputs(small_data):
    corpus, train_docs, _ = small_data
    with pytest.raises(EmptyDocument):
        train([], corpus, SMALL_MODEL, SMALL_TRAIN)
    with pytest.raises(ConfigError):
        train(train_docs, corpus, SMALL_MODEL, dataclasses.replace(SMALL_TRAIN, learning_rate=0))


def test_train_runs_reports_mean(small_data):
    corpus, train_docs, test_docs = small_data
    tc = dataclasses.replace(SMALL_TRAIN, epochs=1)
    out = train_runs(train_docs, corpus, SMALL_MODEL, tc, test_docs=test_docs, seeds=[0, 1])
    accs = [r["test_accuracy"] for r in out["runs"]]
    assert out["mean_test_accuracy"] == pytest.approx(np.mean(accs))


def test_checkpoint_roundtrip_is_exact(small_data, small_model, tmp_path):
    corpus, _, test_docs = small_data
    path = tmp_path / "m.bin"
    save_checkpoint(path, small_model, corpus, SMALL_TRAIN, SMALL_PRE)
    ck = load_checkpoint(path)
    assert ck.train_config == SMALL_TRAIN and ck.preprocess_config == SMALL_PRE
    assert ck.corpus.vocab.itos == corpus.vocab.itos
    np.testing.assert_array_equal(predict_many(ck.model, test_docs, ck.corpus),
                                  predict_many(small_model, test_docs, corpus))
    again = tmp_path / "again.bin"
    save_checkpoint(again, ck.model, ck.corpus, ck.train_config, ck.preprocess_config)
    assert again.read_bytes() == path.read_bytes()


def test_bad_checkpoint_file(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"nope")
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_predict_matches_batch(small_data, small_model):
    corpus, _, test_docs = small_data
    probs = predict_many(small_model, test_docs, corpus)
    for i in (0, 5):
        p = predict(small_model, test_docs[i], corpus)
        np.testing.assert_allclose(p.probs, probs[i], rtol=1e-5)
        assert p.label == int(np.argmax(p.probs))


def test_config_loading(tmp_path):
    (tmp_path / "train.jsonl").write_text("")
    path = tmp_path / "cfg.toml"
    path.write_text('[data]\ntrain = "train.jsonl"\n[train]\nepochs = 3\n')
    cfg = load_config(path)
    assert cfg.train.epochs == 3 and cfg.data.train == str(tmp_path / "train.jsonl")
    assert cfg.model.attn_dim == 150
    with pytest.raises(ConfigError):
        config_from_dict({"train": {"epoch": 3}})
    with pytest.raises(ConfigError):
        config_from_dict({"nope": {}})
    path.write_text('[data]\ntrain = "missing.jsonl"\n')
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        TrainConfig(alpha_mix=0).validate()
