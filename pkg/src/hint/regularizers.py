"""Topic regularizers and the composite topic objective.

Topic embeddings are the K columns (length N) of the decoder weight, so every
Gram matrix here is K x K. Functions accept batched inputs with a leading
document axis and an optional sentence mask.
"""

from __future__ import annotations

import torch

OCCURRENCE_FLOOR = 1e-6


def _t(x):
    return x if torch.is_tensor(x) else torch.as_tensor(x, dtype=torch.float64)


def orthogonal_reg(r_rec, s, mask=None) -> torch.Tensor:
    """Sum over sentences of |<r'_i, s_i>|."""
    dots = (_t(r_rec) * _t(s)).sum(-1).abs()
    if mask is not None:
        dots = dots * mask
    return dots.sum(-1)


def topic_occurrence(z, mask=None) -> torch.Tensor:
    """Per-document mean of sentence topic distributions, g_k."""
    z = _t(z)
    if mask is None:
        return z.mean(-2)
    m = mask.to(z.dtype).unsqueeze(-1)
    return (z * m).sum(-2) / m.sum(-2)


def topic_gram(topic_embeddings) -> torch.Tensor:
    """K x K inner products of K x N topic vectors."""
    t = _t(topic_embeddings)
    return t @ t.transpose(-1, -2)


def pm_matrix(g) -> torch.Tensor:
    g = _t(g)
    return g.unsqueeze(-1) * g.unsqueeze(-2)


def disc_matrix(g, topic_embeddings=None, gram=None) -> torch.Tensor:
    """Pairwise discrepancy 1 - (g_a g_b) <zeta_a, zeta_b>, diagonal included."""
    gram = topic_gram(topic_embeddings) if gram is None else _t(gram)
    return 1.0 - pm_matrix(g) * gram


def uniqueness_reg(topic_embeddings) -> torch.Tensor:
    gram = topic_gram(topic_embeddings)
    eye = torch.eye(gram.shape[-1], dtype=gram.dtype)
    return torch.linalg.matrix_norm(gram - eye)


def uniqueness_target(g, alpha_mix: float, floor: float = OCCURRENCE_FLOOR) -> torch.Tensor:
    g = _t(g).clamp_min(floor)
    eye = torch.eye(g.shape[-1], dtype=g.dtype)
    return alpha_mix * eye + (1.0 - alpha_mix) / pm_matrix(g)


def combined_uniqueness_reg(topic_embeddings, g, alpha_mix: float = 0.5,
                            floor: float = OCCURRENCE_FLOOR) -> torch.Tensor:
    """Frobenius distance between the topic Gram matrix and the mixed target
    alpha*I + (1-alpha)/(g g^T). One value per document when g is batched."""
    gram = topic_gram(topic_embeddings)
    return torch.linalg.matrix_norm(gram - uniqueness_target(g, alpha_mix, floor))


def combined_uniqueness_reg_grad(topic_embeddings, g, alpha_mix: float = 0.5,
                                 floor: float = OCCURRENCE_FLOOR) -> torch.Tensor:
    """Closed-form gradient of the combined regularizer w.r.t. the K x N topic
    vectors (g held fixed): 2 (G - T) Z / ||G - T||."""
    z = _t(topic_embeddings)
    diff = topic_gram(z) - uniqueness_target(g, alpha_mix, floor)
    return 2.0 * diff @ z / torch.linalg.matrix_norm(diff)


def topic_loss(elbo, r1, r2, lambda1: float = 0.05, lambda2: float = 0.01):
    return elbo + lambda1 * r1 + lambda2 * r2
