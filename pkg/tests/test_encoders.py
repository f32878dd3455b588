import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st
from torch import nn

from hint.context import ContextEncoder, attention_pool, compact, encode_context, masked_softmax, uncompact
from hint.errors import EmptySentence, NumericalError
from hint.topic import (TopicEncoder, elbo_loss, encode_topic, gaussian_kl, reconstruction_error,
                        sample_omega, sentence_seed, topic_attention)


@pytest.fixture(autouse=True)
def double_precision():
    old = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(old)


def test_masked_softmax_zeroes_pads_exactly():
    p = masked_softmax(torch.tensor([[1.0, 2.0, 50.0]]), torch.tensor([[True, True, False]]))
    assert p[0, 2].item() == 0.0
    np.testing.assert_allclose(p[0, :2].numpy(), [1 / (1 + math.e), math.e / (1 + math.e)])
    with pytest.raises(EmptySentence):
        masked_softmax(torch.zeros(1, 2), torch.zeros(1, 2, dtype=torch.bool))


def test_attention_pool_hand_example():
    h = torch.eye(2).unsqueeze(0)              # two tokens, N = 2
    proj = nn.Linear(2, 2)
    with torch.no_grad():
        proj.weight.copy_(torch.eye(2))
        proj.bias.zero_()
    gamma = torch.tensor([1.0, 0.0])
    u, alpha, s = attention_pool(h, torch.ones(1, 2, dtype=torch.bool), proj, gamma)
    t = math.tanh(1.0)
    a0 = 1.0 / (1.0 + math.exp(-t))
    np.testing.assert_allclose(u[0].detach().numpy(), [[t, 0], [0, t]])
    np.testing.assert_allclose(alpha[0].detach().numpy(), [a0, 1 - a0], rtol=1e-12)
    np.testing.assert_allclose(s[0].detach().numpy(), [a0, 1 - a0], rtol=1e-12)


def test_compact_roundtrip():
    x = torch.arange(12.0).reshape(2, 3, 2)
    mask = torch.tensor([[False, True, True], [True, False, True]])
    xs, ms, order = compact(x, mask)
    assert ms.tolist() == [[True, True, False], [True, True, False]]
    assert xs[0, 0].tolist() == [2.0, 3.0]
    back = uncompact(xs, order)
    assert torch.equal(back, x)


def test_context_encoder_ignores_padding():
    torch.manual_seed(0)
    enc = ContextEncoder(6)
    x = torch.randn(1, 4, 6)
    mask = torch.tensor([[True, True, True, False]])
    full = enc(x, mask)
    changed = x.clone()
    changed[0, 3] = 100.0
    other = enc(changed, mask)
    torch.testing.assert_close(full.s, other.s)
    assert full.alpha[0, 3].item() == 0.0
    assert torch.all(full.h[0, 3] == 0)
    # left padding gives the same encoding as right padding
    left = torch.cat([torch.zeros(1, 1, 6), x[:, :3]], 1)
    torch.testing.assert_close(enc(left, torch.tensor([[False, True, True, True]])).s, full.s)
    single = encode_context(x[0], mask[0], enc)
    torch.testing.assert_close(single.s, full.s[0])


def test_context_encoder_hidden_size_and_empty_sentence():
    enc = ContextEncoder(8)
    assert enc.lstm.hidden_size == 4 and enc.gamma.shape == (4,)
    with pytest.raises(EmptySentence):
        enc(torch.randn(1, 2, 8), torch.zeros(1, 2, dtype=torch.bool))


def test_sample_omega_uses_sigma_not_variance():
    lin = nn.Linear(1, 1)
    with torch.no_grad():
        lin.weight.zero_()
        lin.bias.zero_()
    mu, var, omega = sample_omega(torch.zeros(1, 1), lin, lin, eps=torch.tensor([[2.0]]))
    assert mu.item() == 0.5 and var.item() == 0.5
    assert omega.item() == pytest.approx(0.5 + math.sqrt(0.5) * 2.0)
    assert sample_omega(torch.zeros(1, 1), lin, lin)[2].item() == 0.5


def test_topic_attention_relu_scores():
    x = torch.tensor([[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]])
    beta = topic_attention(torch.tensor([[1.0, 0.0]]), x, torch.ones(1, 3, dtype=torch.bool))
    e = math.e
    np.testing.assert_allclose(beta[0].numpy(), [e / (e + 2), 1 / (e + 2), 1 / (e + 2)])


def test_encode_topic_shapes_and_simplex():
    torch.manual_seed(1)
    enc, dec = nn.Linear(4, 3), nn.Linear(3, 4)
    beta = torch.softmax(torch.randn(2, 5), -1)
    r, z, r_rec = encode_topic(beta, torch.randn(2, 5, 4), enc, dec)
    assert r.shape == (2, 4) and z.shape == (2, 3) and r_rec.shape == (2, 4)
    torch.testing.assert_close(z.sum(-1), torch.ones(2))
    assert torch.all(r_rec.abs() < 1)


def test_kl_hand_values():
    assert gaussian_kl(torch.tensor([1.0]), torch.tensor([1.0])).item() == 0.5
    assert gaussian_kl(torch.zeros(3), torch.ones(3)).item() == 0.0
    with pytest.raises(NumericalError):
        gaussian_kl(torch.zeros(2), torch.tensor([1.0, 0.0]))


def test_elbo_hand_value():
    r = torch.tensor([[1.0, 0.0], [0.0, 0.0]])
    r_rec = torch.tensor([[0.0, 0.0], [0.0, 0.0]])
    mu = torch.tensor([[1.0, 0.0], [0.0, 0.0]])
    var = torch.ones(2, 2)
    # recon: mean sq error 0.5 + 0; KL: 0.5 and 0 averaged
    assert elbo_loss(r, r_rec, mu, var).item() == pytest.approx(0.5 + 0.25)
    assert reconstruction_error(r, r).sum().item() == 0.0


def test_topic_encoder_deterministic_without_eps():
    torch.manual_seed(2)
    te = TopicEncoder(4, 3)
    x = torch.randn(2, 3, 4)
    mask = torch.ones(2, 3, dtype=torch.bool)
    w = torch.full((2, 3), 1 / 3)
    a, b = te(x, mask, w), te(x, mask, w)
    torch.testing.assert_close(a.z, b.z)
    torch.testing.assert_close(a.omega, a.mu)
    torch.testing.assert_close(a.seed, sentence_seed(x, w))
    assert te.topic_embeddings.shape == (3, 4) and te.encoder_topics.shape == (4, 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.lists(st.floats(1e-3, 1 - 1e-3), min_size=8, max_size=8))
def test_kl_nonnegative(mu, var):
    mu_t = torch.tensor(mu)
    var_t = torch.tensor(var[: len(mu)])
    assert gaussian_kl(mu_t, var_t).item() >= 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_attention_rows_are_distributions(length, seed):
    g = torch.Generator().manual_seed(seed)
    n = torch.randint(1, length + 1, (1,), generator=g).item()
    mask = torch.zeros(2, length, dtype=torch.bool)
    mask[:, :n] = True
    x = torch.randn(2, length, 4, generator=g)
    beta = topic_attention(torch.randn(2, 4, generator=g), x, mask)
    assert torch.all(beta >= 0)
    torch.testing.assert_close(beta.sum(-1), torch.ones(2))
    assert torch.all(beta[~mask] == 0)
