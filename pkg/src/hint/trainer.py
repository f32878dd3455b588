"""Joint training, inference and checkpoint I/O."""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .config import ModelConfig, PreprocessConfig, TrainConfig
from .corpus import Corpus, Document, EmbeddingTable, TfidfStats, Vocabulary
from .errors import ConfigError, EmptyDocument, NumericalError
from .model import HINT, ForwardOutput, make_batch
from .noise import Noise

log = logging.getLogger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def _batches(docs, batch_size, order=None):
    order = range(len(docs)) if order is None else order
    order = list(order)
    for i in range(0, len(order), batch_size):
        yield [docs[j] for j in order[i: i + batch_size]]


@dataclass
class TrainResult:
    model: HINT
    log: list[dict]
    best_epoch: int
    best_val_accuracy: float | None


@torch.no_grad()
def evaluate_docs(model: HINT, docs: Sequence[Document], tfidf: TfidfStats,
                  train_config: TrainConfig | None = None, batch_size: int = 64) -> dict:
    """Deterministic mean loss and accuracy over ``docs``."""
    was_training = model.training
    model.eval()
    total, correct, loss = 0, 0, 0.0
    for chunk in _batches(docs, batch_size):
        batch = make_batch(chunk, tfidf, model.dtype)
        out = model(batch, train_config=train_config)
        loss += float(out.l_final.sum())
        correct += int((out.probs.argmax(-1) == batch.labels).sum())
        total += len(chunk)
    model.train(was_training)
    return {"loss": loss / max(total, 1), "accuracy": correct / max(total, 1)}


def train(train_docs: Sequence[Document], corpus: Corpus, model_config: ModelConfig,
          train_config: TrainConfig, val_docs: Sequence[Document] | None = None,
          log_path: str | Path | None = None, eval_train: bool = False,
          on_epoch: Callable[[dict], None] | None = None, keep: str = "best") -> TrainResult:
    """Train with Adam on the joint objective.

    ``keep="best"`` returns the epoch with the highest validation accuracy
    (the last epoch without validation documents); ``keep="last"`` always
    returns the final epoch and uses validation data for logging only.
    Identical configs and seeds give identical logs and parameters.
    """
    if keep not in ("best", "last"):
        raise ConfigError(f"keep must be 'best' or 'last', not {keep!r}")
    model_config.validate()
    train_config.validate()
    if not train_docs:
        raise EmptyDocument("no training documents")
    tc = train_config
    dtype = _DTYPES[tc.dtype]
    model = HINT.create(len(corpus.vocab), model_config, corpus.embeddings.matrix, seed=tc.seed, dtype=dtype)
    opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=tc.learning_rate)
    noise = Noise(tc.seed + 1)
    shuffler = np.random.default_rng(tc.seed + 2)

    history: list[dict] = []
    best_state, best_epoch, best_acc = None, -1, None
    good_state = copy.deepcopy(model.state_dict())
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(tc.epochs):
            model.train()
            sums = {"loss": 0.0, "l_c": 0.0, "l_topic": 0.0, "elbo": 0.0, "r1": 0.0, "r2": 0.0}
            n_docs, correct = 0, 0
            order = shuffler.permutation(len(train_docs))
            for step, chunk in enumerate(_batches(train_docs, tc.batch_size, order)):
                batch = make_batch(chunk, corpus.tfidf, dtype)
                try:
                    out = model(batch, noise=noise, train_config=tc)
                except NumericalError as exc:
                    raise NumericalError(f"epoch {epoch} step {step}: {exc}", checkpoint=good_state) from exc
                loss = out.loss
                if not torch.isfinite(loss):
                    raise NumericalError(f"non-finite loss at epoch {epoch} step {step}", checkpoint=good_state)
                opt.zero_grad()
                loss.backward()
                if tc.clip_norm is not None:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), tc.clip_norm)
                opt.step()
                k = len(chunk)
                n_docs += k
                sums["loss"] += float(loss.detach()) * k
                for name in ("l_c", "l_topic", "elbo", "r1", "r2"):
                    sums[name] += float(getattr(out, name).detach().sum())
                correct += int((out.probs.argmax(-1) == batch.labels).sum())
            good_state = copy.deepcopy(model.state_dict())
            entry = {"epoch": epoch, **{f"train_{k}": v / n_docs for k, v in sums.items()},
                     "train_running_accuracy": correct / n_docs}
            if eval_train:
                entry["train_accuracy"] = evaluate_docs(model, train_docs, corpus.tfidf, tc)["accuracy"]
            if val_docs:
                ev = evaluate_docs(model, val_docs, corpus.tfidf, tc)
                entry["val_loss"], entry["val_accuracy"] = ev["loss"], ev["accuracy"]
            if val_docs and keep == "best":
                if best_acc is None or ev["accuracy"] > best_acc:
                    best_acc, best_epoch, best_state = ev["accuracy"], epoch, good_state
            else:
                best_epoch, best_state = epoch, good_state
                best_acc = entry.get("val_accuracy")
            history.append(entry)
            log.info("epoch %d %s", epoch, entry)
            if log_fh:
                log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
                log_fh.flush()
            if on_epoch:
                on_epoch(entry)
    finally:
        if log_fh:
            log_fh.close()
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model=model, log=history, best_epoch=best_epoch, best_val_accuracy=best_acc)


def train_runs(train_docs, corpus, model_config, train_config, val_docs=None, test_docs=None,
               seeds: Sequence[int] | None = None) -> dict:
    """Repeat training over several seeds and average the test accuracy."""
    seeds = list(seeds) if seeds is not None else list(range(train_config.seed, train_config.seed + train_config.num_runs))
    runs = []
    for seed in seeds:
        tc = dataclasses.replace(train_config, seed=seed)
        res = train(train_docs, corpus, model_config, tc, val_docs)
        acc = evaluate_docs(res.model, test_docs, corpus.tfidf, tc)["accuracy"] if test_docs else None
        runs.append({"seed": seed, "best_epoch": res.best_epoch, "val_accuracy": res.best_val_accuracy,
                     "test_accuracy": acc})
    accs = [r["test_accuracy"] for r in runs if r["test_accuracy"] is not None]
    return {"runs": runs, "mean_test_accuracy": float(np.mean(accs)) if accs else None,
            "std_test_accuracy": float(np.std(accs)) if accs else None}


@dataclass
class Prediction:
    label: int
    probs: np.ndarray
    output: ForwardOutput = field(repr=False)


@torch.no_grad()
def predict(model: HINT, document: Document, corpus: Corpus) -> Prediction:
    """Deterministic inference on one encoded document (no sampling, no dropout)."""
    if document.sentences is None:
        corpus.vocab.encode_document(document)
    if not document.sentences or not any(document.sentences):
        raise EmptyDocument(f"document {document.id!r} is empty")
    was_training = model.training
    model.eval()
    out = model(make_batch([document], corpus.tfidf, model.dtype))
    model.train(was_training)
    probs = out.probs[0].numpy()
    return Prediction(label=int(probs.argmax()), probs=probs, output=out)


@torch.no_grad()
def predict_many(model: HINT, docs: Sequence[Document], corpus: Corpus, batch_size: int = 64) -> np.ndarray:
    """Class probabilities for many documents, shape (len(docs), C)."""
    model.eval()
    rows = []
    for chunk in _batches(docs, batch_size):
        rows.append(model(make_batch(chunk, corpus.tfidf, model.dtype)).probs.numpy())
    return np.concatenate(rows) if rows else np.zeros((0, model.config.num_classes))


# checkpoint layout: magic, u64 header length, JSON header, raw little-endian tensors
_MAGIC = b"HINTCKPT\x01"


def save_checkpoint(path: str | Path, model: HINT, corpus: Corpus,
                    train_config: TrainConfig | None = None,
                    preprocess_config: PreprocessConfig | None = None):
    tensors, blobs, offset = [], [], 0
    for name, t in model.state_dict().items():
        arr = t.detach().cpu().numpy()
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        tensors.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "format": 1,
        "model_config": dataclasses.asdict(model.config),
        "train_config": dataclasses.asdict(train_config) if train_config else None,
        "preprocess_config": dataclasses.asdict(preprocess_config) if preprocess_config else None,
        "vocab": corpus.vocab.to_dict(),
        "tfidf": corpus.tfidf.to_dict(),
        "tensors": tensors,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


@dataclass
class Checkpoint:
    model: HINT
    corpus: Corpus
    train_config: TrainConfig | None
    preprocess_config: PreprocessConfig | None


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_MAGIC):
        raise ConfigError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack_from("<Q", data, len(_MAGIC))
    start = len(_MAGIC) + 8
    header = json.loads(data[start: start + hlen].decode("utf-8"))
    body = start + hlen
    state = {}
    for t in header["tensors"]:
        buf = data[body + t["offset"]: body + t["offset"] + t["nbytes"]]
        arr = np.frombuffer(buf, dtype=np.dtype(t["dtype"]).newbyteorder("<")).reshape(t["shape"])
        state[t["name"]] = torch.from_numpy(arr.astype(t["dtype"]))
    mc = ModelConfig(**header["model_config"])
    vocab = Vocabulary.from_dict(header["vocab"])
    model = HINT(len(vocab), mc)
    dtype = state["embedding.weight"].dtype
    model = model.to(dtype)
    model.load_state_dict(state)
    model.eval()
    emb = EmbeddingTable(state["embedding.weight"].numpy().astype(np.float64))
    corpus = Corpus(vocab, TfidfStats.from_dict(header["tfidf"]), emb)
    tc = TrainConfig(**header["train_config"]) if header.get("train_config") else None
    pc = PreprocessConfig(**header["preprocess_config"]) if header.get("preprocess_config") else None
    return Checkpoint(model, corpus, tc, pc)
