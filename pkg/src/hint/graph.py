"""Document graph over sentences with static topic-similarity edges."""

from __future__ import annotations

import torch
from torch import nn

from .context import masked_softmax

LOG_FLOOR = 1e-12


def topic_similarity_edges(z: torch.Tensor, mask: torch.Tensor | None = None):
    """Return (c, e): c_ij = z_i . z_j and e = row-wise softmax of c.

    With a sentence mask, padded nodes neither send nor receive weight.
    """
    c = z @ z.transpose(-1, -2)
    if mask is None:
        return c, torch.softmax(c, dim=-1)
    pair = mask.unsqueeze(-1) & mask.unsqueeze(-2)
    # padded rows get a self-loop so the softmax stays defined; their output is masked later
    eye = torch.eye(c.shape[-1], dtype=torch.bool).expand_as(pair)
    e = masked_softmax(c, pair | (eye & ~mask.unsqueeze(-1)))
    return c, e * mask.unsqueeze(-1)


def gat_forward(nodes: torch.Tensor, e: torch.Tensor, weights, num_layers: int | None = None) -> torch.Tensor:
    """s^{l+1}_i = ReLU(sum_j e_ij W s^l_j) with the same edges at every layer.

    ``weights`` is a sequence of square matrices (tensors or bias-free Linear
    layers), one per layer.
    """
    layers = list(weights)[: num_layers if num_layers is not None else None]
    for w in layers:
        msg = w(nodes) if isinstance(w, nn.Module) else nodes @ w.transpose(-1, -2)
        nodes = torch.relu(e @ msg)
    return nodes


def mean_pool(nodes: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    if mask is None:
        return nodes.mean(-2)
    m = mask.to(nodes.dtype).unsqueeze(-1)
    return (nodes * m).sum(-2) / m.sum(-2)


class Classifier(nn.Module):
    def __init__(self, in_dim: int, hidden: int, num_classes: int):
        super().__init__()
        self.hidden = nn.Linear(in_dim, hidden)
        self.out = nn.Linear(hidden, num_classes)

    def forward(self, x):
        return self.out(nn.functional.leaky_relu(self.hidden(x)))


class DocumentGraph(nn.Module):
    """Node projection, static-edge GAT layers, mean pooling and classifier."""

    def __init__(self, in_dim: int, node_hidden: int, node_dim: int, num_layers: int,
                 clf_hidden: int, num_classes: int):
        super().__init__()
        self.node_in = nn.Linear(in_dim, node_hidden)
        self.node_out = nn.Linear(node_hidden, node_dim)
        self.gat = nn.ModuleList(nn.Linear(node_dim, node_dim, bias=False) for _ in range(num_layers))
        self.classifier = Classifier(node_dim, clf_hidden, num_classes)

    def project(self, s):
        return self.node_out(nn.functional.leaky_relu(self.node_in(s)))

    def forward(self, s, e, mask=None):
        """Return (final node states, document vector, class logits)."""
        nodes = gat_forward(self.project(s), e, self.gat)
        doc = mean_pool(nodes, mask)
        return nodes, doc, self.classifier(doc)

    def sentence_logits(self, s):
        """Classify each sentence as a one-node graph (self-loop weight 1)."""
        nodes = self.project(s)
        for w in self.gat:
            nodes = torch.relu(w(nodes))
        return self.classifier(nodes)


def pool_and_classify(nodes, classifier, mask=None):
    w_d = mean_pool(nodes, mask)
    return w_d, torch.softmax(classifier(w_d), dim=-1)


def classification_loss(y_hat: torch.Tensor, y) -> torch.Tensor:
    """Cross-entropy -log y_hat[y], with the probability floored at 1e-12."""
    y = torch.as_tensor(y)
    picked = y_hat.gather(-1, y.long().unsqueeze(-1)).squeeze(-1)
    return -picked.clamp_min(LOG_FLOOR).log()


def final_loss(l_topic, l_c, eta_a: float = 0.001, eta_b: float = 1.0):
    return eta_a * l_topic + eta_b * l_c
