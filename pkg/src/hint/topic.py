"""Label-independent sentence topic encoder.

A TFIDF-weighted seed vector parameterizes a Gaussian over the attention
query omega; sampled omega scores the words (beta), the beta-weighted
sentence vector r is encoded into a topic distribution z and decoded back
to a reconstruction r'. Training minimizes reconstruction error plus the
Gaussian KL to a standard normal prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .context import masked_softmax
from .errors import NumericalError


@dataclass
class SentenceTopicEncoding:
    seed: torch.Tensor   # S x N, TFIDF-weighted mean of word vectors
    mu: torch.Tensor     # S x N
    var: torch.Tensor    # S x N, sigma squared
    omega: torch.Tensor  # S x N
    beta: torch.Tensor   # S x L
    r: torch.Tensor      # S x N
    z: torch.Tensor      # S x K
    r_rec: torch.Tensor  # S x N


def sentence_seed(word_vectors: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    return torch.einsum("...l,...ln->...n", weights, word_vectors)


def sample_omega(seed, mu_net: nn.Linear, var_net: nn.Linear, eps=None):
    """Reparameterized draw omega = mu + sigma * eps; eps=None means eps = 0."""
    mu = torch.sigmoid(mu_net(seed))
    var = torch.sigmoid(var_net(seed))
    omega = mu if eps is None else mu + var.sqrt() * eps
    return mu, var, omega


def topic_attention(omega: torch.Tensor, word_vectors: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    scores = torch.relu(torch.einsum("...n,...ln->...l", omega, word_vectors))
    return masked_softmax(scores, mask)


def encode_topic(beta, word_vectors, encoder: nn.Linear, decoder: nn.Linear, decoder_input=None):
    r = torch.einsum("...l,...ln->...n", beta, word_vectors)
    z = torch.softmax(encoder(r), dim=-1)
    r_rec = torch.tanh(decoder(z if decoder_input is None else decoder_input(z)))
    return r, z, r_rec


def gaussian_kl(mu: torch.Tensor, var: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, var) || N(0, I)) summed over the last axis."""
    if bool((var <= 0).any()):
        raise NumericalError("non-positive variance in KL term")
    return 0.5 * (mu.pow(2) + var - var.log() - 1.0).sum(-1)


def reconstruction_error(r: torch.Tensor, r_rec: torch.Tensor) -> torch.Tensor:
    return (r_rec - r).pow(2).mean(-1)


def margin_reconstruction(r, r_rec, negatives):
    """Max-margin alternative: the reconstruction should score r above a negative."""
    return torch.relu(1.0 - (r_rec * r).sum(-1) + (r_rec * negatives).sum(-1))


def elbo_loss(r, r_rec, mu, var) -> torch.Tensor:
    """Negative ELBO for one document's sentences (M x N tensors).

    Sum of per-sentence reconstruction errors plus the mean per-sentence KL.
    """
    r, r_rec, mu, var = (torch.as_tensor(t, dtype=torch.float64) if not torch.is_tensor(t) else t
                         for t in (r, r_rec, mu, var))
    return reconstruction_error(r, r_rec).sum() + gaussian_kl(mu, var).mean()


class TopicEncoder(nn.Module):
    def __init__(self, embed_dim: int, num_topics: int, topic_input: str = "attended"):
        super().__init__()
        self.mu_net = nn.Linear(embed_dim, embed_dim)
        self.var_net = nn.Linear(embed_dim, embed_dim)
        self.encoder = nn.Linear(embed_dim, num_topics)
        self.decoder = nn.Linear(num_topics, embed_dim)
        self.topic_input = topic_input

    @property
    def topic_embeddings(self) -> torch.Tensor:
        """K x N decoder topic vectors (columns of the decoder weight)."""
        return self.decoder.weight.t()

    @property
    def encoder_topics(self) -> torch.Tensor:
        """N x K encoder matrix whose columns score words per topic."""
        return self.encoder.weight.t()

    def forward(self, x, mask, tfidf, eps=None, dropout=None) -> SentenceTopicEncoding:
        seed = sentence_seed(x, tfidf)
        mu, var, omega = sample_omega(seed, self.mu_net, self.var_net, eps)
        att_omega = dropout(omega) if dropout is not None else omega
        beta = topic_attention(att_omega, x, mask)
        r = torch.einsum("sl,sln->sn", beta, x)
        z = torch.softmax(self.encoder(r if self.topic_input == "attended" else seed), dim=-1)
        z_in = dropout(z) if dropout is not None else z
        r_rec = torch.tanh(self.decoder(z_in))
        return SentenceTopicEncoding(seed=seed, mu=mu, var=var, omega=omega, beta=beta, r=r, z=z, r_rec=r_rec)
