"""Text ingestion: tokenization, vocabulary, TFIDF statistics, embeddings.

Everything here is plain Python/numpy and free of model state, so it can be
run once per dataset and cached.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import PreprocessConfig
from .errors import ConfigError, EmptyDocument

PAD = "<pad>"
UNK = "<unk>"

_TAG_RE = re.compile(r"<[^>]+>")
_SENT_RE = re.compile(r"[.!?]+|\n+")
_TOKEN_RE = re.compile(r"\w+(?:'\w+)*")


@dataclass
class Document:
    id: str
    tokens: list[list[str]]
    label: int = 0
    raw_sentences: list[str] = field(default_factory=list)
    # token ids, filled by Vocabulary.encode_document
    sentences: list[list[int]] | None = None

    @property
    def num_sentences(self):
        return len(self.tokens)

    def __len__(self):
        return sum(len(s) for s in self.tokens)


def split_sentences(text: str) -> list[str]:
    text = _TAG_RE.sub("\n", text)
    parts = (p.strip() for p in _SENT_RE.split(text))
    return [p for p in parts if p]


def tokenize_sentence(sentence: str) -> list[str]:
    return _TOKEN_RE.findall(sentence.lower())


def tokenize_document(raw: str, config: PreprocessConfig | None = None,
                      doc_id: str = "", label: int = 0) -> Document:
    """Split ``raw`` into lowercased token sentences, truncated per config.

    >>> tokenize_document("Good movie. Bad plot.").tokens
    [['good', 'movie'], ['bad', 'plot']]
    """
    config = config or PreprocessConfig()
    tokens, raws = [], []
    for sent in split_sentences(raw):
        toks = tokenize_sentence(sent)
        if not toks:
            continue
        tokens.append(toks[: config.max_sentence_len])
        raws.append(sent)
        if len(tokens) == config.max_doc_sentences:
            break
    if not tokens:
        raise EmptyDocument(f"document {doc_id!r} has no tokens")
    return Document(id=str(doc_id), tokens=tokens, label=int(label), raw_sentences=raws)


class Vocabulary:
    """Token/id bijection with reserved pad (id 0) and unk (id 1) entries."""

    pad_id = 0
    unk_id = 1

    def __init__(self, tokens: Sequence[str], freqs: Sequence[int] | None = None):
        self.itos = [PAD, UNK] + list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ConfigError("duplicate tokens in vocabulary")
        freqs = list(freqs) if freqs is not None else [0] * len(tokens)
        self.freqs = [0, 0] + freqs

    def __len__(self):
        return len(self.itos)

    @property
    def size(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    def encode_document(self, doc: Document) -> Document:
        doc.sentences = [self.encode(s) for s in doc.tokens]
        return doc

    def to_dict(self):
        return {"tokens": self.itos[2:], "freqs": self.freqs[2:]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tokens"], d.get("freqs"))


def build_vocabulary(docs: Sequence[Document], max_vocab: int) -> Vocabulary:
    """Keep the ``max_vocab`` most frequent tokens; ties go to the smaller token."""
    counts = Counter(t for doc in docs for sent in doc.tokens for t in sent)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_vocab]
    return Vocabulary([t for t, _ in ranked], [c for _, c in ranked])


def unk_fraction(ids: Sequence[int], unk_id: int = Vocabulary.unk_id) -> float:
    return sum(1 for i in ids if i == unk_id) / max(len(ids), 1)


def filter_unk_sentences(docs: Sequence[Document], vocab: Vocabulary,
                         threshold: float = 0.3, split: str = "train") -> list[Document]:
    """Drop training sentences whose unk fraction exceeds ``threshold``.

    Only the training split is filtered; other splits are returned as-is.
    Training documents left without sentences are dropped.
    """
    if split != "train":
        return list(docs)
    out = []
    for doc in docs:
        if doc.sentences is None:
            vocab.encode_document(doc)
        keep = [i for i, ids in enumerate(doc.sentences) if unk_fraction(ids, vocab.unk_id) <= threshold]
        if not keep:
            continue
        raws = doc.raw_sentences
        out.append(Document(
            id=doc.id,
            tokens=[doc.tokens[i] for i in keep],
            label=doc.label,
            raw_sentences=[raws[i] for i in keep] if len(raws) == len(doc.tokens) else list(raws),
            sentences=[doc.sentences[i] for i in keep],
        ))
    return out


@dataclass
class TfidfStats:
    df: np.ndarray  # document frequency per vocabulary id
    num_docs: int
    oov_weight: float = 1e-4

    def idf(self, token_id: int) -> float | None:
        d = self.df[token_id] if 0 <= token_id < len(self.df) else 0
        if d <= 0:
            return None
        return math.log(self.num_docs / d)

    def to_dict(self):
        return {"df": self.df.tolist(), "num_docs": self.num_docs, "oov_weight": self.oov_weight}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["df"], dtype=np.int64), int(d["num_docs"]), float(d["oov_weight"]))


def compute_tfidf(docs: Sequence[Document], vocab: Vocabulary, oov_weight: float = 1e-4) -> TfidfStats:
    df = np.zeros(len(vocab), dtype=np.int64)
    for doc in docs:
        if doc.sentences is None:
            vocab.encode_document(doc)
        for idx in {i for s in doc.sentences for i in s}:
            df[idx] += 1
    return TfidfStats(df=df, num_docs=len(docs), oov_weight=oov_weight)


def tfidf_weight(stats: TfidfStats, token_id: int, doc: Document) -> float:
    """Raw weight tf(t, d) * log(N / df(t)); unk and unseen tokens get oov_weight."""
    idf = None if token_id in (Vocabulary.unk_id, Vocabulary.pad_id) else stats.idf(token_id)
    if idf is None:
        return stats.oov_weight
    tf = sum(s.count(token_id) for s in doc.sentences)
    return tf * idf


def sentence_tfidf_weights(stats: TfidfStats, doc: Document) -> list[np.ndarray]:
    """Per-sentence TFIDF weights normalized to sum to one.

    Sentences whose raw weights are all zero fall back to uniform weights.
    """
    tf = Counter(i for s in doc.sentences for i in s)
    out = []
    for sent in doc.sentences:
        raw = np.empty(len(sent))
        for j, idx in enumerate(sent):
            idf = None if idx in (Vocabulary.unk_id, Vocabulary.pad_id) else stats.idf(idx)
            raw[j] = stats.oov_weight if idf is None else tf[idx] * idf
        total = raw.sum()
        out.append(raw / total if total > 0 else np.full(len(sent), 1.0 / len(sent)))
    return out


@dataclass
class EmbeddingTable:
    matrix: np.ndarray  # V x N
    matched: int = 0

    @property
    def dim(self):
        return self.matrix.shape[1]


def random_embeddings(vocab: Vocabulary, dim: int, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    mat = rng.uniform(-0.05, 0.05, size=(len(vocab), dim))
    mat[vocab.pad_id] = 0.0
    return EmbeddingTable(mat, matched=0)


def load_embeddings(path: str | Path, vocab: Vocabulary, dim: int = 300, seed: int = 0) -> EmbeddingTable:
    """Read a "token v1 ... vN" text file into a V x N matrix.

    Tokens missing from the file keep a seeded uniform [-0.05, 0.05] row and
    the pad row is zero.
    """
    table = random_embeddings(vocab, dim, seed)
    mat = table.matrix
    matched = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.rstrip().split(" ")
            if lineno == 0 and len(parts) == 2:
                continue  # word2vec-style "count dim" header
            if len(parts) < 2:
                continue
            if len(parts) - 1 != dim:
                raise ConfigError(f"{path}:{lineno + 1}: expected {dim} values, got {len(parts) - 1}")
            idx = vocab.stoi.get(parts[0])
            if idx is None or idx == vocab.pad_id:
                continue
            mat[idx] = np.asarray(parts[1:], dtype=np.float64)
            matched += 1
    return EmbeddingTable(mat, matched=matched)


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return rows


def load_documents(path: str | Path, config: PreprocessConfig | None = None,
                   skip_empty: bool = True) -> list[Document]:
    """Read a JSONL file of {"id", "text", "label"} records."""
    docs = []
    for n, row in enumerate(read_jsonl(path)):
        if "text" not in row:
            raise ConfigError(f"{path}: record {n} has no 'text'")
        try:
            docs.append(tokenize_document(row["text"], config, doc_id=row.get("id", str(n)),
                                          label=int(row.get("label", 0))))
        except EmptyDocument:
            if not skip_empty:
                raise
    return docs


def write_jsonl(path: str | Path, rows: Iterable[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


@dataclass
class Corpus:
    """Preprocessed training artifacts: vocabulary, TFIDF stats, embeddings."""

    vocab: Vocabulary
    tfidf: TfidfStats
    embeddings: EmbeddingTable

    @classmethod
    def build(cls, train_docs: Sequence[Document], config: PreprocessConfig | None = None,
              embeddings_path: str | Path | None = None, seed: int = 0) -> "Corpus":
        config = config or PreprocessConfig()
        vocab = build_vocabulary(train_docs, config.max_vocab)
        for doc in train_docs:
            vocab.encode_document(doc)
        tfidf = compute_tfidf(train_docs, vocab, config.oov_tfidf)
        if embeddings_path:
            emb = load_embeddings(embeddings_path, vocab, config.embed_dim, seed)
        else:
            emb = random_embeddings(vocab, config.embed_dim, seed)
        return cls(vocab, tfidf, emb)

    def prepare(self, docs: Sequence[Document], config: PreprocessConfig | None = None,
                split: str = "test") -> list[Document]:
        """Encode docs against the vocabulary, filtering unk-heavy train sentences."""
        config = config or PreprocessConfig()
        for doc in docs:
            self.vocab.encode_document(doc)
        return filter_unk_sentences(docs, self.vocab, config.unk_threshold, split)
