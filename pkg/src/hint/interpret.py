"""Hierarchical explanations: words, sentences, and the whole document.

* word level: context attention (alpha, label-dependent) and topic attention
  (beta, topic-related) for every token;
* sentence level: the sentence's dominant topic and the label distribution
  obtained by classifying the sentence on its own;
* document level: the sentence-topic heatmap, the prominent and contrastive
  topics, per-topic polarity and an extracted keyphrase label per topic.
"""

from __future__ import annotations

import html
import json
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np
import torch

from .corpus import Corpus, Document
from .errors import ConfigError
from .model import HINT
from .trainer import Prediction, predict


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("hint").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


@dataclass
class TopicWordTable:
    pi: np.ndarray                # V x K word-topic scores
    words: list[list[int]]        # per topic, top ids by descending score

    def top_tokens(self, vocab, topic: int) -> list[str]:
        return [vocab.token(i) for i in self.words[topic]]


def topic_word_table(E, W_c, n: int = 10, restrict_to: Sequence[int] | None = None,
                     exclude: Sequence[int] = ()) -> TopicWordTable:
    """Score words against topics with pi = E @ W_c and rank each column.

    ``restrict_to`` limits the ranking to a set of token ids (a local word
    cloud for one document); ``exclude`` drops ids such as pad/unk. Ties are
    broken by lower token id.
    """
    E = np.asarray(E, dtype=np.float64)
    W_c = np.asarray(W_c, dtype=np.float64)
    pi = E @ W_c
    candidates = np.arange(pi.shape[0]) if restrict_to is None else np.unique(np.asarray(list(restrict_to), dtype=np.int64))
    if len(exclude):
        candidates = candidates[~np.isin(candidates, np.asarray(list(exclude)))]
    words = []
    for k in range(pi.shape[1]):
        scores = pi[candidates, k]
        order = np.lexsort((candidates, -scores))
        words.append(candidates[order[:n]].tolist())
    return TopicWordTable(pi=pi, words=words)


def model_topic_word_table(model: HINT, n: int = 10, restrict_to=None) -> TopicWordTable:
    E = model.embedding.weight.detach().double().numpy()
    W_c = model.topic.encoder_topics.detach().double().numpy()
    return topic_word_table(E, W_c, n, restrict_to, exclude=(0, 1))


def argmax_lowest(x) -> int:
    """Index of the maximum, lowest index on ties."""
    return int(np.argmax(np.asarray(x)))


@torch.no_grad()
def sentence_interpretation(s_i, z_i, model: HINT):
    """Return (topic id, label distribution) for one sentence."""
    s = torch.as_tensor(s_i, dtype=model.dtype).reshape(1, -1)
    label_dist = torch.softmax(model.graph.sentence_logits(s), -1)[0].double().numpy()
    return argmax_lowest(z_i), label_dist


def extract_keyphrase(sentence: str | Sequence[str], stopwords=None, beta: Sequence[float] | None = None) -> str:
    """Best keyphrase of a sentence by RAKE scoring.

    Candidates are maximal runs of non-stopword tokens (punctuation also
    splits runs). Each word scores degree/frequency over the candidates and
    a phrase scores the sum over its words; ties go to the earliest phrase.
    If every token is a stopword the highest-beta token is returned.
    """
    stopwords = default_stopwords() if stopwords is None else stopwords
    if isinstance(sentence, str):
        pieces = re.findall(r"\w+(?:'\w+)*|[^\w\s]", sentence.lower())
        tokens = [p for p in pieces if re.match(r"\w", p)]
    else:
        pieces = tokens = [t.lower() for t in sentence]
    if not tokens:
        return ""
    candidates, run = [], []
    for p in pieces:
        if p in stopwords or not re.match(r"\w", p):
            if run:
                candidates.append(run)
            run = []
        else:
            run.append(p)
    if run:
        candidates.append(run)
    if not candidates:
        idx = argmax_lowest(beta) if beta is not None and len(beta) == len(tokens) else 0
        return tokens[idx]
    freq, degree = Counter(), Counter()
    for cand in candidates:
        for w in cand:
            freq[w] += 1
            degree[w] += len(cand)
    scores = [sum(degree[w] / freq[w] for w in cand) for cand in candidates]
    return " ".join(candidates[argmax_lowest(scores)])


@dataclass
class SentenceReport:
    text: str
    tokens: list[str]
    topic_id: int
    label_dist: list[float]
    alpha: list[float]
    beta: list[float]


@dataclass
class TopicReport:
    id: int
    role: str                 # "prominent", "active" or "contrastive"
    words: list[str]
    scores: list[float]
    local_words: list[str]
    keyphrase: str
    polarity: list[float]
    sentences: list[int]


@dataclass
class InterpretationReport:
    doc_id: str
    predicted_label: int
    label_dist: list[float]
    sentences: list[SentenceReport]
    topics: list[TopicReport]
    heatmap: list[list[float]]
    prominent_topic: int
    contrastive_topic: int
    heatmap_source: str = "context-topic"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "InterpretationReport":
        d = dict(d)
        d["sentences"] = [SentenceReport(**s) for s in d["sentences"]]
        d["topics"] = [TopicReport(**t) for t in d["topics"]]
        return cls(**d)


def _floats(x) -> list:
    return np.asarray(x, dtype=np.float64).tolist()


def mode_lowest(ids: Sequence[int]) -> int:
    counts = Counter(ids)
    best = max(counts.values())
    return min(k for k, c in counts.items() if c == best)


def sentence_topic_heatmap(S: np.ndarray, topic_vectors: np.ndarray, Z: np.ndarray):
    """T = S @ topic_vectors.T when dimensions agree, else the z matrix."""
    if S.shape[1] == topic_vectors.shape[1]:
        return S @ topic_vectors.T, "context-topic"
    return Z, "topic-distribution"


@torch.no_grad()
def document_interpretation(model: HINT, doc: Document, corpus: Corpus,
                            prediction: Prediction | None = None, top_n: int = 10,
                            stopwords=None) -> InterpretationReport:
    prediction = prediction or predict(model, doc, corpus)
    out = prediction.output
    m = len(doc.sentences)
    S = out.s[0, :m].double().numpy()
    Z = out.z[0, :m].double().numpy()
    alpha = out.context.alpha.double().numpy()
    beta = out.topic.beta.double().numpy()
    enc_topics = model.topic.encoder_topics.detach().double().numpy().T    # K x N
    dec_topics = model.topic.topic_embeddings.detach().double().numpy()    # K x N
    gram = dec_topics @ dec_topics.T

    sentences, assigned = [], []
    label_dists = torch.softmax(model.graph.sentence_logits(out.s[0, :m]), -1).double().numpy()
    for i in range(m):
        n_tok = len(doc.sentences[i])
        k = argmax_lowest(Z[i])
        assigned.append(k)
        text = doc.raw_sentences[i] if i < len(doc.raw_sentences) else " ".join(doc.tokens[i])
        sentences.append(SentenceReport(
            text=text, tokens=list(doc.tokens[i]), topic_id=k, label_dist=_floats(label_dists[i]),
            alpha=_floats(alpha[i, :n_tok]), beta=_floats(beta[i, :n_tok])))

    T, source = sentence_topic_heatmap(S, enc_topics, Z)
    prominent = mode_lowest(assigned)
    others = [k for k in range(gram.shape[0]) if k != prominent]
    contrastive = min(others, key=lambda k: (gram[prominent, k], k))

    table = model_topic_word_table(model, top_n)
    local = model_topic_word_table(model, top_n, restrict_to={i for s in doc.sentences for i in s})
    active = sorted(set(assigned))
    topic_ids = [prominent] + [k for k in active if k != prominent]
    if contrastive not in topic_ids:
        topic_ids.append(contrastive)
    topics = []
    for k in topic_ids:
        members = [i for i, a in enumerate(assigned) if a == k]
        best = argmax_lowest(T[:, k])
        polarity = label_dists[members].mean(0) if members else label_dists[best]
        n_tok = len(doc.sentences[best])
        role = "prominent" if k == prominent else ("active" if k in active else "contrastive")
        topics.append(TopicReport(
            id=k, role=role,
            words=table.top_tokens(corpus.vocab, k),
            scores=_floats(table.pi[table.words[k], k]),
            local_words=local.top_tokens(corpus.vocab, k),
            keyphrase=extract_keyphrase(doc.tokens[best], stopwords, beta[best, :n_tok]),
            polarity=_floats(polarity), sentences=members))

    return InterpretationReport(
        doc_id=doc.id, predicted_label=prediction.label, label_dist=_floats(prediction.probs),
        sentences=sentences, topics=topics, heatmap=_floats(T), prominent_topic=prominent,
        contrastive_topic=contrastive, heatmap_source=source)


REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["doc_id", "predicted_label", "label_dist", "sentences", "topics", "heatmap",
                 "prominent_topic", "contrastive_topic"],
    "properties": {
        "doc_id": {"type": "string"},
        "predicted_label": {"type": "integer", "minimum": 0},
        "label_dist": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "prominent_topic": {"type": "integer", "minimum": 0},
        "contrastive_topic": {"type": "integer", "minimum": 0},
        "heatmap_source": {"type": "string"},
        "heatmap": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "sentences": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "required": ["text", "topic_id", "label_dist", "alpha", "beta"],
            "properties": {
                "text": {"type": "string"},
                "tokens": {"type": "array", "items": {"type": "string"}},
                "topic_id": {"type": "integer", "minimum": 0},
                "label_dist": {"type": "array", "items": {"type": "number"}},
                "alpha": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "beta": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
            }}},
        "topics": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "words", "keyphrase", "polarity"],
            "properties": {
                "id": {"type": "integer", "minimum": 0},
                "role": {"enum": ["prominent", "active", "contrastive"]},
                "words": {"type": "array", "items": {"type": "string"}},
                "scores": {"type": "array", "items": {"type": "number"}},
                "local_words": {"type": "array", "items": {"type": "string"}},
                "keyphrase": {"type": "string"},
                "polarity": {"type": "array", "items": {"type": "number"}},
                "sentences": {"type": "array", "items": {"type": "integer"}},
            }}},
    },
}


def _cloud(topic: TopicReport) -> str:
    if topic.scores:
        lo, hi = min(topic.scores), max(topic.scores)
    spans = []
    for w, sc in zip(topic.words, topic.scores):
        rel = (sc - lo) / (hi - lo) if hi > lo else 1.0
        size = 12 + 20 * rel
        spans.append(f'<span class="word" style="font-size:{size:.1f}px">{html.escape(w)}</span>')
    bar = "".join(
        f'<div class="pol c{c}" style="width:{100 * p:.1f}%"></div>' for c, p in enumerate(topic.polarity))
    return (f'<div class="wordcloud" data-topic="{topic.id}" data-role="{topic.role}">'
            f'<div class="polarity">{bar}</div>'
            f'<h3>Topic {topic.id}: {html.escape(topic.keyphrase)}</h3>{" ".join(spans)}</div>')


def _heat_color(v, lo, hi):
    rel = (v - lo) / (hi - lo) if hi > lo else 0.0
    g = int(255 - 200 * rel)
    return f"rgb({g},{g},255)"


def render_html(report: InterpretationReport) -> str:
    rows = []
    for i, s in enumerate(report.sentences):
        toks = []
        for t, a, b in zip(s.tokens, s.alpha, s.beta):
            toks.append(f'<span class="tok" style="background:rgba(255,200,0,{a:.3f});'
                        f'border-bottom:3px solid rgba(0,90,255,{b:.3f})">{html.escape(t)}</span>')
        bar = "".join(f'<div class="pol c{c}" style="width:{100 * p:.1f}%"></div>'
                      for c, p in enumerate(s.label_dist))
        rows.append(f'<div class="sentence" data-topic="{s.topic_id}"><b>S{i + 1}</b> '
                    f'<div class="labelbar">{bar}</div> {" ".join(toks)}</div>')
    flat = [v for row in report.heatmap for v in row]
    lo, hi = (min(flat), max(flat)) if flat else (0.0, 0.0)
    shown = [t.id for t in report.topics]
    head = "".join(f"<th>T{k}</th>" for k in shown)
    body = "".join(
        f"<tr><th>S{i + 1}</th>" + "".join(
            f'<td style="background:{_heat_color(row[k], lo, hi)}">{row[k]:.2f}</td>' for k in shown if k < len(row))
        + "</tr>" for i, row in enumerate(report.heatmap))
    clouds = "".join(_cloud(t) for t in report.topics)
    dist = ", ".join(f"{p:.3f}" for p in report.label_dist)
    return f"""<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>{html.escape(report.doc_id)}</title>
<style>
body {{ font-family: sans-serif; max-width: 60em; }}
.labelbar, .polarity {{ display: inline-flex; width: 6em; height: 0.7em; }}
.pol.c0 {{ background: #d33; }} .pol.c1 {{ background: #3a3; }} .pol.c2 {{ background: #33d; }}
.pol.c3 {{ background: #aa3; }} .pol.c4 {{ background: #a3a; }}
.wordcloud {{ display: inline-block; vertical-align: top; width: 16em; margin: 0.5em; padding: 0.5em; border: 1px solid #ccc; }}
td {{ padding: 0.2em 0.5em; }}
</style></head><body>
<h1>Document {html.escape(report.doc_id)}</h1>
<p>Predicted label: <b>{report.predicted_label}</b> ({dist});
prominent topic {report.prominent_topic}, contrastive topic {report.contrastive_topic}</p>
<h2>Sentences</h2>
{"".join(rows)}
<h2>Sentence-topic heatmap</h2>
<table class="heatmap"><tr><th></th>{head}</tr>{body}</table>
<h2>Topics</h2>
{clouds}
</body></html>
"""


def render_report(report: InterpretationReport, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")
    if format == "html":
        return render_html(report).encode("utf-8")
    raise ConfigError(f"unknown report format {format!r}")


def parse_report(data: bytes | str) -> InterpretationReport:
    return InterpretationReport.from_dict(json.loads(data))
