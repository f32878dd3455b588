"""The full classifier: embeddings, dual sentence encoders, document graph.

A batch holds every sentence of every document flattened into one S x L
token matrix; ``sent_pos`` maps each flattened sentence back to its
(document, slot) position in the B x M document layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .config import ModelConfig, TrainConfig
from .context import ContextEncoder, SentenceContextEncoding
from .corpus import Document, TfidfStats, sentence_tfidf_weights
from .errors import EmptyDocument
from .graph import DocumentGraph, LOG_FLOOR, topic_similarity_edges
from .regularizers import combined_uniqueness_reg, orthogonal_reg, topic_occurrence
from .topic import SentenceTopicEncoding, TopicEncoder, gaussian_kl, margin_reconstruction, reconstruction_error


@dataclass
class Batch:
    ids: torch.Tensor        # S x L token ids
    tok_mask: torch.Tensor   # S x L
    tfidf: torch.Tensor      # S x L normalized weights
    sent_pos: torch.Tensor   # S flat index into B*M
    sent_mask: torch.Tensor  # B x M
    labels: torch.Tensor     # B

    @property
    def num_docs(self):
        return self.sent_mask.shape[0]


def make_batch(docs: Sequence[Document], tfidf: TfidfStats, dtype=torch.float32) -> Batch:
    if not docs:
        raise EmptyDocument("empty batch")
    for d in docs:
        if not d.sentences or not any(d.sentences):
            raise EmptyDocument(f"document {d.id!r} has no sentences")
    max_m = max(len(d.sentences) for d in docs)
    max_l = max(len(s) for d in docs for s in d.sentences)
    sents = [(b, m, s, w) for b, d in enumerate(docs)
             for m, (s, w) in enumerate(zip(d.sentences, sentence_tfidf_weights(tfidf, d)))]
    ids = np.zeros((len(sents), max_l), dtype=np.int64)
    weights = np.zeros((len(sents), max_l))
    pos = np.empty(len(sents), dtype=np.int64)
    sent_mask = np.zeros((len(docs), max_m), dtype=bool)
    for i, (b, m, s, w) in enumerate(sents):
        ids[i, : len(s)] = s
        weights[i, : len(s)] = w
        pos[i] = b * max_m + m
        sent_mask[b, m] = True
    ids_t = torch.from_numpy(ids)
    return Batch(
        ids=ids_t,
        tok_mask=ids_t != 0,
        tfidf=torch.from_numpy(weights).to(dtype),
        sent_pos=torch.from_numpy(pos),
        sent_mask=torch.from_numpy(sent_mask),
        labels=torch.tensor([d.label for d in docs], dtype=torch.long),
    )


@dataclass
class ForwardOutput:
    context: SentenceContextEncoding
    topic: SentenceTopicEncoding
    s: torch.Tensor          # B x M x N context vectors in document layout
    z: torch.Tensor          # B x M x K
    edges: torch.Tensor      # B x M x M
    similarity: torch.Tensor
    nodes: torch.Tensor      # B x M x node_dim final GAT states
    doc_vec: torch.Tensor    # B x node_dim
    logits: torch.Tensor     # B x C
    probs: torch.Tensor      # B x C
    elbo: torch.Tensor       # per-document losses, shape B
    r1: torch.Tensor
    r2: torch.Tensor
    l_topic: torch.Tensor
    l_c: torch.Tensor
    l_final: torch.Tensor

    @property
    def loss(self):
        return self.l_final.mean()


def _to_doc_layout(x: torch.Tensor, batch: Batch) -> torch.Tensor:
    b, m = batch.sent_mask.shape
    out = x.new_zeros((b * m,) + x.shape[1:])
    out = out.index_copy(0, batch.sent_pos, x)
    return out.view((b, m) + x.shape[1:])


class HINT(nn.Module):
    def __init__(self, vocab_size: int, config: ModelConfig, embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        n = config.embed_dim
        self.embedding = nn.Embedding(vocab_size, n, padding_idx=0)
        if embeddings is not None:
            if embeddings.shape != (vocab_size, n):
                raise ValueError(f"embedding matrix shape {embeddings.shape} != {(vocab_size, n)}")
            with torch.no_grad():
                self.embedding.weight.copy_(torch.as_tensor(embeddings))
        self.embedding.weight.requires_grad_(not config.freeze_embeddings)
        self.context = ContextEncoder(n, config.attn_dim)
        self.topic = TopicEncoder(n, config.num_topics, config.topic_input)
        self.graph = DocumentGraph(n, config.node_hidden, config.node_dim, config.gat_layers,
                                   config.clf_hidden, config.num_classes)

    @classmethod
    def create(cls, vocab_size, config: ModelConfig, embeddings=None, seed: int = 0, dtype=torch.float32):
        """Build with parameters initialized from ``seed`` without touching global RNG state."""
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            model = cls(vocab_size, config, embeddings)
        return model.to(dtype)

    @property
    def dtype(self):
        return self.embedding.weight.dtype

    def forward(self, batch: Batch, noise=None, eps=None, train_config: TrainConfig | None = None) -> ForwardOutput:
        """Run the model on a batch.

        Sampling and dropout happen only in training mode with a Noise source;
        ``eps`` overrides the sampled omega noise (S x N) in either mode.
        """
        tc = train_config or TrainConfig()
        cfg = self.config
        stochastic = self.training and noise is not None
        drop = (lambda t: noise.dropout(t, cfg.dropout)) if stochastic and cfg.dropout > 0 else None

        x = self.embedding(batch.ids)
        if drop is not None:
            x = drop(x)
        mask = batch.tok_mask
        ctx = self.context(x, mask, dropout=drop)
        if eps is None and stochastic:
            eps = noise.normal((x.shape[0], cfg.embed_dim), dtype=x.dtype)
        top = self.topic(x, mask, batch.tfidf.to(x.dtype), eps=eps, dropout=drop)

        smask = batch.sent_mask
        s = _to_doc_layout(ctx.s, batch)
        z = _to_doc_layout(top.z, batch)
        z_edges = z.detach() if cfg.edge_stop_gradient else z
        sim, edges = topic_similarity_edges(z_edges, smask)
        nodes, doc_vec, logits = self.graph(s, edges, smask)
        log_probs = torch.log_softmax(logits, dim=-1)
        probs = log_probs.exp()

        # topic objective, per document
        fmask = smask.to(x.dtype)
        if cfg.recon == "margin":
            rec = margin_reconstruction(top.r, top.r_rec, top.r.roll(1, dims=0))
        else:
            rec = reconstruction_error(top.r, top.r_rec)
        kl = gaussian_kl(top.mu, top.var)
        count = fmask.sum(-1)
        elbo = (_to_doc_layout(rec, batch) * fmask).sum(-1) + (_to_doc_layout(kl, batch) * fmask).sum(-1) / count
        r_rec = _to_doc_layout(top.r_rec, batch)
        r1 = orthogonal_reg(r_rec, s, fmask)
        g = topic_occurrence(z, smask)
        if not tc.r2_occurrence_grad:
            g = g.detach()
        r2 = combined_uniqueness_reg(self.topic.topic_embeddings, g, tc.alpha_mix)
        l_topic = elbo + tc.lambda1 * r1 + tc.lambda2 * r2
        l_c = -log_probs.gather(-1, batch.labels.unsqueeze(-1)).squeeze(-1).clamp_min(math.log(LOG_FLOOR))
        l_final = tc.eta_a * l_topic + tc.eta_b * l_c
        return ForwardOutput(
            context=ctx, topic=top, s=s, z=z, edges=edges, similarity=sim, nodes=nodes,
            doc_vec=doc_vec, logits=logits, probs=probs, elbo=elbo, r1=r1, r2=r2,
            l_topic=l_topic, l_c=l_c, l_final=l_final,
        )
