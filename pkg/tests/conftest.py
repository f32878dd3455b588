import dataclasses

import pytest

from hint.config import ModelConfig, PreprocessConfig, TrainConfig
from hint.corpus import Corpus, tokenize_document
from hint.synthetic import separable_corpus

SMALL_PRE = PreprocessConfig(embed_dim=32)
SMALL_MODEL = ModelConfig(embed_dim=32, num_topics=8, node_hidden=32, node_dim=16, clf_hidden=32)
SMALL_TRAIN = TrainConfig(learning_rate=5e-3, epochs=2, batch_size=16, seed=0)


def to_docs(rows, cfg=SMALL_PRE):
    return [tokenize_document(r["text"], cfg, r["id"], r["label"]) for r in rows]


@pytest.fixture(scope="session")
def small_data():
    """A 60/20 split of the separable toy corpus with built artifacts."""
    rows = separable_corpus(80, seed=11)
    train_docs, test_docs = to_docs(rows[:60]), to_docs(rows[60:])
    corpus = Corpus.build(train_docs, SMALL_PRE, seed=0)
    train_docs = corpus.prepare(train_docs, SMALL_PRE, "train")
    test_docs = corpus.prepare(test_docs, SMALL_PRE, "test")
    return corpus, train_docs, test_docs


@pytest.fixture(scope="session")
def small_model(small_data):
    from hint.trainer import train

    corpus, train_docs, test_docs = small_data
    return train(train_docs, corpus, SMALL_MODEL, dataclasses.replace(SMALL_TRAIN, epochs=3), test_docs).model


CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
