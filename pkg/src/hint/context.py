"""Label-dependent sentence encoder: biLSTM followed by two-layer attention."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .errors import EmptySentence


def masked_softmax(logits: torch.Tensor, mask: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Softmax over unmasked entries; masked entries get exactly zero weight."""
    if not bool(mask.any(dim=dim).all()):
        raise EmptySentence("masked softmax over a fully masked row")
    logits = logits.masked_fill(~mask, float("-inf"))
    return torch.softmax(logits, dim=dim).masked_fill(~mask, 0.0)


def compact(x: torch.Tensor, mask: torch.Tensor):
    """Move unmasked positions of each row to the front, preserving order.

    Returns the gathered tensor, the compacted mask and the permutation used,
    so results can be scattered back with :func:`uncompact`.
    """
    order = torch.argsort((~mask).to(torch.int8), dim=1, stable=True)
    xs = torch.gather(x, 1, order.unsqueeze(-1).expand(-1, -1, x.shape[-1]))
    ms = torch.gather(mask, 1, order)
    return xs, ms, order


def uncompact(y: torch.Tensor, order: torch.Tensor) -> torch.Tensor:
    out = torch.zeros_like(y)
    return out.scatter(1, order.unsqueeze(-1).expand(-1, -1, y.shape[-1]), y)


@dataclass
class SentenceContextEncoding:
    h: torch.Tensor      # S x L x N hidden states (zero at pads)
    u: torch.Tensor      # S x L x A attention vectors
    alpha: torch.Tensor  # S x L attention weights
    s: torch.Tensor      # S x N context vectors


def attention_pool(h, mask, proj: nn.Linear, gamma: torch.Tensor):
    u = torch.tanh(proj(h))
    alpha = masked_softmax(u @ gamma, mask)
    s = torch.einsum("sl,sln->sn", alpha, h)
    return u, alpha, s


class ContextEncoder(nn.Module):
    def __init__(self, embed_dim: int, attn_dim: int | None = None):
        super().__init__()
        if embed_dim % 2:
            raise ValueError("embed_dim must be even for the bidirectional encoder")
        attn_dim = attn_dim or embed_dim // 2
        self.lstm = nn.LSTM(embed_dim, embed_dim // 2, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(embed_dim, attn_dim)
        self.gamma = nn.Parameter(torch.empty(attn_dim).uniform_(-0.1, 0.1))

    def recurrent(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        xs, ms, order = compact(x, mask)
        lengths = ms.sum(1)
        if bool((lengths == 0).any()):
            raise EmptySentence("sentence with no unmasked tokens")
        packed = pack_padded_sequence(xs, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.lstm(packed)
        h, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        return uncompact(h, order)

    def forward(self, x: torch.Tensor, mask: torch.Tensor, dropout=None) -> SentenceContextEncoding:
        h = self.recurrent(x, mask)
        if dropout is not None:
            h = dropout(h)
        u, alpha, s = attention_pool(h, mask, self.proj, self.gamma)
        return SentenceContextEncoding(h=h, u=u, alpha=alpha, s=s)


def encode_context(word_vectors: torch.Tensor, mask: torch.Tensor,
                   encoder: ContextEncoder) -> SentenceContextEncoding:
    """Encode one sentence (L x N vectors, L booleans) in inference mode."""
    enc = encoder(word_vectors.unsqueeze(0), mask.unsqueeze(0))
    return SentenceContextEncoding(h=enc.h[0], u=enc.u[0], alpha=enc.alpha[0], s=enc.s[0])
