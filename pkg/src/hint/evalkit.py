"""Quantitative evaluation: classification metrics, topic coherence,
word-removal curves, completeness/sufficiency and rationale agreement."""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch
from scipy import stats

from .corpus import UNK, Corpus, Document, Vocabulary, read_jsonl
from .errors import ConfigError
from .model import HINT
from .trainer import predict, predict_many

EPS = 1e-12
DEFAULT_BINS = (1, 5, 10, 20, 50)


# ---------------------------------------------------------------- classification

def accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    preds, golds = np.asarray(preds), np.asarray(golds)
    if preds.shape != golds.shape:
        raise ValueError("preds and golds differ in length")
    return float((preds == golds).mean()) if len(golds) else 0.0


def per_class_prf(preds: Sequence[int], golds: Sequence[int], num_classes: int | None = None) -> dict:
    """One-vs-rest precision/recall/F1 per class plus the macro average.

    A class missing from both preds and golds gets zeros and ``absent=True``.
    """
    preds, golds = np.asarray(preds), np.asarray(golds)
    if preds.shape != golds.shape:
        raise ValueError("preds and golds differ in length")
    if num_classes is None:
        num_classes = int(max(preds.max(initial=-1), golds.max(initial=-1))) + 1
    table = {}
    for c in range(num_classes):
        tp = int(((preds == c) & (golds == c)).sum())
        n_pred, n_gold = int((preds == c).sum()), int((golds == c).sum())
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        table[c] = {"precision": p, "recall": r, "f1": f, "support": n_gold,
                    "absent": n_pred == 0 and n_gold == 0}
    rows = list(table.values())
    macro = {k: float(np.mean([row[k] for row in rows])) if rows else 0.0 for k in ("precision", "recall", "f1")}
    return {"classes": table, "macro": macro}


# ---------------------------------------------------------------- coherence

def _as_token_lists(docs) -> list[list[str]]:
    out = []
    for d in docs:
        if isinstance(d, Document):
            out.append([t for s in d.tokens for t in s])
        elif isinstance(d, str):
            out.append(d.split())
        else:
            out.append(list(d))
    return out


def window_counts(docs, words: Iterable[str], window: int):
    """Boolean sliding-window document frequencies.

    Each document contributes max(1, len - window + 1) windows; a document
    shorter than the window is a single window. Returns (single counts,
    pair counts keyed by sorted word tuple, number of windows).
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    words = set(words)
    single, joint = Counter(), Counter()
    total = 0
    for toks in _as_token_lists(docs):
        if not toks:
            continue
        n_win = max(1, len(toks) - window + 1)
        for start in range(n_win):
            present = sorted(words.intersection(toks[start: start + window]))
            total += 1
            single.update(present)
            joint.update(combinations(present, 2))
    return single, joint, total


def _probs(single, joint, total, w1, w2):
    p1, p2 = single[w1] / total, single[w2] / total
    p12 = p1 if w1 == w2 else joint[tuple(sorted((w1, w2)))] / total
    return p1, p2, p12


def _pmi(p1, p2, p12):
    return math.log((p12 + EPS) / (p1 * p2))


def _npmi(p1, p2, p12):
    denom = -math.log(p12 + EPS)
    if denom <= 0:
        return 1.0  # both words occur in every window
    return _pmi(p1, p2, p12) / denom


@dataclass
class CoherenceResult:
    metric: str
    scores: list[float]                 # one per topic (nan if nothing scorable)
    skipped: list[list[str]] = field(default_factory=list)  # words absent from the reference corpus

    @property
    def mean(self) -> float:
        vals = [s for s in self.scores if not math.isnan(s)]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self):
        return {"metric": self.metric, "scores": self.scores, "mean": self.mean, "skipped": self.skipped}


def _topic_pair_scores(topic, single, joint, total, fn):
    scores, missing = [], sorted({w for w in topic if single[w] == 0})
    for w1, w2 in combinations(topic, 2):
        if single[w1] == 0 or single[w2] == 0:
            continue
        scores.append(fn(*_probs(single, joint, total, w1, w2)))
    return scores, missing


def _cv_score(topic, single, joint, total):
    words = [w for w in dict.fromkeys(topic) if single[w] > 0]
    missing = sorted({w for w in topic if single[w] == 0})
    if len(words) < 2:
        return float("nan"), missing
    vecs = np.array([[_npmi(*_probs(single, joint, total, a, b)) for b in words] for a in words])
    whole = vecs.sum(0)
    cos = []
    for v in vecs:
        denom = np.linalg.norm(v) * np.linalg.norm(whole)
        cos.append(float(v @ whole / denom) if denom > 0 else 0.0)
    return float(np.mean(cos)), missing


def topic_coherence(topics: Sequence[Sequence[str]], reference_docs, metric: str = "npmi",
                    window: int | None = None) -> CoherenceResult:
    """Coherence of each topic word list against a tokenized reference corpus.

    Pairs involving a word that never occurs in the reference corpus are
    skipped; the skipped words are listed per topic and a warning is raised.
    """
    metric = metric.lower()
    if metric not in ("npmi", "uci", "cv"):
        raise ConfigError(f"unknown coherence metric {metric!r}")
    if window is None:
        window = 10 if metric == "uci" else 110
    if any(len(t) == 0 for t in topics):
        raise ConfigError("topic word lists must be nonempty")
    vocab = {w for t in topics for w in t}
    single, joint, total = window_counts(reference_docs, vocab, window)
    if total == 0:
        raise ConfigError("reference corpus is empty")
    scores, skipped = [], []
    for topic in topics:
        if metric == "cv":
            score, missing = _cv_score(list(topic), single, joint, total)
        else:
            pair_scores, missing = _topic_pair_scores(list(topic), single, joint, total,
                                                      _npmi if metric == "npmi" else _pmi)
            score = float(np.mean(pair_scores)) if pair_scores else float("nan")
        scores.append(score)
        skipped.append(missing)
    if any(skipped):
        warnings.warn(f"{sum(map(len, skipped))} topic word(s) absent from the reference corpus; pairs skipped",
                      stacklevel=2)
    return CoherenceResult(metric, scores, skipped)


def npmi_pair(w1: str, w2: str, reference_docs, window: int = 110) -> float:
    single, joint, total = window_counts(reference_docs, {w1, w2}, window)
    return _npmi(*_probs(single, joint, total, w1, w2))


def coherence_npmi(topic: Sequence[str], reference_docs, window: int = 110) -> float:
    return topic_coherence([topic], reference_docs, "npmi", window).scores[0]


def coherence_uci(topic: Sequence[str], reference_docs, window: int = 10) -> float:
    return topic_coherence([topic], reference_docs, "uci", window).scores[0]


def coherence_cv(topic: Sequence[str], reference_docs, window: int = 110) -> float:
    return topic_coherence([topic], reference_docs, "cv", window).scores[0]


# ---------------------------------------------------------------- token surgery

def replace_with_unk(doc: Document, positions: Iterable[tuple[int, int]] | None = None,
                     token_ids: Iterable[int] | None = None, keep_only: bool = False) -> Document:
    """Copy of ``doc`` with tokens swapped for unk.

    ``positions`` are (sentence, token) pairs and ``token_ids`` vocabulary
    ids; with ``keep_only`` everything *except* the selected positions is
    replaced. Sentence lengths are unchanged.
    """
    positions = set(positions or ())
    token_ids = set(token_ids or ())
    tokens, ids = [], []
    for i, (toks, sent) in enumerate(zip(doc.tokens, doc.sentences)):
        t_row, i_row = [], []
        for j, (t, idx) in enumerate(zip(toks, sent)):
            hit = (i, j) in positions or idx in token_ids
            if hit != keep_only:
                t, idx = UNK, Vocabulary.unk_id
            t_row.append(t)
            i_row.append(idx)
        tokens.append(t_row)
        ids.append(i_row)
    return Document(id=doc.id, tokens=tokens, label=doc.label,
                    raw_sentences=list(doc.raw_sentences), sentences=ids)


def token_positions(doc: Document) -> list[tuple[int, int]]:
    return [(i, j) for i, s in enumerate(doc.sentences) for j in range(len(s))]


@torch.no_grad()
def token_importance(model: HINT, doc: Document, corpus: Corpus, prediction=None) -> dict:
    """alpha + beta per (sentence, token) position."""
    out = (prediction or predict(model, doc, corpus)).output
    alpha = out.context.alpha.double().numpy()
    beta = out.topic.beta.double().numpy()
    return {(i, j): float(alpha[i, j] + beta[i, j]) for i, j in token_positions(doc)}


def bin_sizes(n_tokens: int, bins: Sequence[float] = DEFAULT_BINS) -> list[int]:
    """Rationale size per bin: ceil(n * b / 100) tokens."""
    return [min(n_tokens, math.ceil(round(n_tokens * b / 100, 9))) for b in bins]


def top_positions(importance: Mapping[tuple[int, int], float], count: int) -> list[tuple[int, int]]:
    """The ``count`` most important positions, ties broken by document order."""
    ranked = sorted(importance, key=lambda p: (-importance[p], p))
    return ranked[:count]


# ---------------------------------------------------------------- completeness / sufficiency

def _prob(model, doc, corpus, label):
    return float(predict(model, doc, corpus).probs[label])


def completeness_sufficiency(model: HINT, doc: Document, corpus: Corpus,
                             rationale: Iterable[tuple[int, int]]) -> dict:
    """Probability change of the predicted class when the rationale is
    removed (completeness) or is all that is kept (sufficiency)."""
    full = predict(model, doc, corpus)
    j = full.label
    m_x = float(full.probs[j])
    rationale = set(rationale)
    without = replace_with_unk(doc, positions=rationale)
    only = replace_with_unk(doc, positions=rationale, keep_only=True)
    return {"label": j, "p_full": m_x,
            "completeness": m_x - _prob(model, without, corpus, j),
            "sufficiency": m_x - _prob(model, only, corpus, j)}


def faithfulness_bins(model: HINT, doc: Document, corpus: Corpus,
                      bins: Sequence[float] = DEFAULT_BINS) -> list[dict]:
    """Completeness and sufficiency with the top b% alpha+beta tokens as rationale."""
    bins = sorted(bins)
    if any(b <= 0 or b > 100 for b in bins):
        raise ConfigError("bins must be percentages in (0, 100]")
    full = predict(model, doc, corpus)
    importance = token_importance(model, doc, corpus, full)
    n = len(importance)
    rows = []
    for b, size in zip(bins, bin_sizes(n, bins)):
        res = completeness_sufficiency(model, doc, corpus, top_positions(importance, size))
        rows.append({"bin": b, "rationale_tokens": size, "kept_tokens": n - size, **res})
    return rows


def aggregate_faithfulness(model, docs, corpus, bins=DEFAULT_BINS) -> list[dict]:
    per_bin: dict = {}
    for doc in docs:
        for row in faithfulness_bins(model, doc, corpus, bins):
            acc = per_bin.setdefault(row["bin"], {"completeness": [], "sufficiency": []})
            acc["completeness"].append(row["completeness"])
            acc["sufficiency"].append(row["sufficiency"])
    return [{"bin": b, **{k: float(np.mean(v)) for k, v in d.items()}} for b, d in sorted(per_bin.items())]


# ---------------------------------------------------------------- word removal

@torch.no_grad()
def removal_lists(model: HINT, docs: Sequence[Document], corpus: Corpus, strategy: str,
                  ks: Sequence[int]) -> dict[int, list[int]]:
    """Token ids to remove for each k, by one of three rankings.

    context: total context attention mass per word over ``docs``;
    topic: total topic attention mass per word;
    unique_topic: round-robin over the topics' word lists (by E @ W_c),
    skipping words already taken.
    """
    vocab_size = len(corpus.vocab)
    for k in ks:
        if k < 0 or k > vocab_size:
            raise ConfigError(f"k={k} outside [0, vocabulary size {vocab_size}]")
    special = {Vocabulary.pad_id, Vocabulary.unk_id}
    if strategy in ("context", "topic"):
        mass = np.zeros(vocab_size)
        for doc in docs:
            out = predict(model, doc, corpus).output
            att = (out.context.alpha if strategy == "context" else out.topic.beta).double().numpy()
            for i, sent in enumerate(doc.sentences):
                np.add.at(mass, np.asarray(sent), att[i, : len(sent)])
        order = [int(i) for i in np.lexsort((np.arange(vocab_size), -mass)) if i not in special and mass[i] > 0]
    elif strategy == "unique_topic":
        from .interpret import model_topic_word_table
        table = model_topic_word_table(model, n=vocab_size)
        order, seen = [], set()
        for rank in range(max(len(w) for w in table.words)):
            for words in table.words:
                if rank < len(words) and words[rank] not in seen:
                    seen.add(words[rank])
                    order.append(words[rank])
    else:
        raise ConfigError(f"unknown removal strategy {strategy!r}")
    return {k: order[:k] for k in ks}


def _labels(docs):
    return np.asarray([d.label for d in docs])


def word_removal_curve(model: HINT, docs: Sequence[Document], corpus: Corpus,
                       lists: Mapping[int, Sequence[int]], batch_size: int = 64) -> dict:
    """Accuracy drop after replacing each list's tokens with unk, plus the
    Pearson correlation between k and the drop."""
    vocab_size = len(corpus.vocab)
    golds = _labels(docs)
    base = accuracy(predict_many(model, docs, corpus, batch_size).argmax(-1), golds)
    points = []
    for k in sorted(lists):
        ids = list(lists[k])
        if k > vocab_size or len(ids) > vocab_size:
            raise ConfigError(f"k={k} exceeds vocabulary size {vocab_size}")
        changed = [replace_with_unk(d, token_ids=ids) for d in docs] if ids else list(docs)
        acc = accuracy(predict_many(model, changed, corpus, batch_size).argmax(-1), golds)
        points.append({"k": k, "accuracy": acc, "drop": base - acc})
    ks = [p["k"] for p in points]
    drops = [p["drop"] for p in points]
    r = float("nan")
    if len(points) > 1 and np.ptp(ks) > 0 and np.ptp(drops) > 0:
        r = float(stats.pearsonr(ks, drops).statistic)
    return {"baseline_accuracy": base, "points": points, "correlation": r}


# ---------------------------------------------------------------- rationales

@dataclass(frozen=True)
class RationaleSet:
    doc_id: str
    indices: frozenset
    granularity: str = "token"   # "token" (flat token index) or "sentence"
    gold: bool = False

    def __post_init__(self):
        if self.granularity not in ("token", "sentence"):
            raise ConfigError(f"unknown granularity {self.granularity!r}")
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))

    def check_bounds(self, doc: Document):
        limit = len(doc) if self.granularity == "token" else doc.num_sentences
        bad = [i for i in self.indices if not 0 <= i < limit]
        if bad:
            raise ConfigError(f"{self.doc_id}: indices {sorted(bad)} outside [0, {limit})")


def rationale_agreement(pred: RationaleSet, gold: RationaleSet) -> tuple[float, float, float]:
    if pred.granularity != gold.granularity:
        raise ConfigError(f"granularity mismatch: {pred.granularity} vs {gold.granularity}")
    overlap = len(pred.indices & gold.indices)
    p = overlap / len(pred.indices) if pred.indices else 0.0
    r = overlap / len(gold.indices) if gold.indices else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def read_rationales(path: str | Path, gold: bool = True) -> dict[str, RationaleSet]:
    """ERASER-style JSONL: {"doc_id", "spans": [{"start_token", "end_token"}]},
    end exclusive; token indices count over the whole document."""
    out = {}
    for row in read_jsonl(path):
        idx = set()
        for span in row.get("spans", []):
            start, end = int(span["start_token"]), int(span["end_token"])
            if end < start:
                raise ConfigError(f"{row['doc_id']}: span end before start")
            idx.update(range(start, end))
        out[str(row["doc_id"])] = RationaleSet(str(row["doc_id"]), frozenset(idx), "token", gold)
    return out


def flat_index(doc: Document, pos: tuple[int, int]) -> int:
    i, j = pos
    return sum(len(s) for s in doc.tokens[:i]) + j


def predicted_rationale(model: HINT, doc: Document, corpus: Corpus, size: int) -> RationaleSet:
    importance = token_importance(model, doc, corpus)
    chosen = top_positions(importance, size)
    return RationaleSet(doc.id, frozenset(flat_index(doc, p) for p in chosen), "token", gold=False)


# ---------------------------------------------------------------- report

@dataclass
class MetricsReport:
    accuracy: float | None = None
    per_class: dict | None = None
    coherence: dict = field(default_factory=dict)
    faithfulness: list | None = None
    removal: dict | None = None
    rationale: dict | None = None

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and math.isnan(x):
                return None
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x
        return json.dumps(clean(self.to_dict()), sort_keys=True, indent=2) + "\n"
