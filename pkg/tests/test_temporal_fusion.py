# SPDX-License-Identifier: GPL-2.0-or-later

import math

import pytest
import torch

import chrono.temporal_fusion

from chrono.spatial_encoder import OPTICAL, RADAR, FeatureMap
from chrono.temporal_fusion import CrossAttentionLayer, CrossAttentionStack, TokenBuilder, TokenTensor


def feature_map(modality, b, t, c=4, h=2, w=2, fill=None):
    values = torch.randn(b * t, c, h, w) if fill is None else torch.full((b * t, c, h, w), fill)
    return FeatureMap(values=values, modality=modality, batch=b, steps=t)


def test_token_layout():
    builder = TokenBuilder(d_time=3)

    with torch.no_grad():
        for p in builder.parameters():
            p.zero_()

    tokens = chrono.temporal_fusion.build_tokens(feature_map(OPTICAL, 1, 3, fill=0.0),
                                                 feature_map(RADAR, 1, 2, fill=0.0),
                                                 torch.zeros(1, 3, 3), torch.zeros(1, 2, 3), builder)

    assert tokens.tokens.shape == (1, 4, 5, 4 + 3 + 2)
    assert tokens.modality == [OPTICAL] * 3 + [RADAR] * 2
    assert torch.equal(tokens.tokens[0, 0, 0], torch.tensor([0.0] * 7 + [1.0, 0.0]))
    assert torch.equal(tokens.tokens[0, 3, 4], torch.tensor([0.0] * 7 + [0.0, 1.0]))


def test_token_date_count_mismatch():
    builder = TokenBuilder(d_time=3)

    with pytest.raises(ValueError):
        builder(feature_map(OPTICAL, 1, 3), None, torch.zeros(1, 2, 3), None)


def tokens_of(x):
    b, p, t, _ = x.shape
    return TokenTensor(tokens=x, modality=[OPTICAL] * t, height=1, width=p)


@pytest.fixture
def stack():
    torch.manual_seed(3)
    return CrossAttentionStack(d_model=8, n_layers=2, n_heads=2, expansion=1).double().eval()


def test_single_token_gets_all_weight(stack):
    x = torch.randn(1, 3, 1, 8, dtype=torch.float64)
    _, record = chrono.temporal_fusion.cross_attend(tokens_of(x), torch.randn(1, 8, dtype=torch.float64),
                                                    stack, record=True)

    assert record is not None
    assert torch.allclose(record.weights, torch.ones_like(record.weights))


def test_identical_tokens_get_uniform_weight(stack):
    x = torch.randn(1, 2, 1, 8, dtype=torch.float64).expand(1, 2, 4, 8).contiguous()
    _, record = stack(tokens_of(x), torch.randn(1, 8, dtype=torch.float64), record=True)

    assert record is not None
    assert torch.allclose(record.weights, torch.full_like(record.weights, 0.25))


def test_weights_form_a_simplex(stack):
    x = torch.randn(2, 4, 5, 8, dtype=torch.float64)
    _, record = stack(tokens_of(x), torch.randn(2, 8, dtype=torch.float64), record=True)

    assert record is not None
    assert record.weights.shape == (2, 2, 2, 4, 5)
    assert record.simplex_error() < 1e-6


def test_permutation_invariance(stack):
    x = torch.randn(1, 4, 6, 8, dtype=torch.float64)
    query = torch.randn(1, 8, dtype=torch.float64)
    perm = torch.tensor([3, 0, 5, 1, 4, 2])

    with torch.no_grad():
        a, _ = stack(tokens_of(x), query)
        b, _ = stack(tokens_of(x[:, :, perm]), query)

    assert torch.allclose(a, b, atol=1e-5)


def test_query_changes_latent(stack):
    x = torch.randn(1, 4, 3, 8, dtype=torch.float64)

    with torch.no_grad():
        a, _ = stack(tokens_of(x), torch.zeros(1, 8, dtype=torch.float64))
        b, _ = stack(tokens_of(x), torch.ones(1, 8, dtype=torch.float64))

    assert not torch.allclose(a, b)


def test_attention_matches_manual_computation():
    torch.manual_seed(1)
    layer = CrossAttentionLayer(d_model=4, n_heads=2).double()
    query = torch.randn(3, 4, dtype=torch.float64)
    kv = torch.randn(3, 5, 4, dtype=torch.float64)

    _, weights = layer.attention(query, kv)

    q = (query @ layer.q.weight.T + layer.q.bias).reshape(3, 2, 2)
    k = (kv @ layer.k.weight.T + layer.k.bias).reshape(3, 5, 2, 2)
    for n in range(3):
        for h in range(2):
            logits = torch.stack([q[n, h] @ k[n, t, h] for t in range(5)]) / math.sqrt(2)
            assert torch.allclose(weights[n, h], torch.softmax(logits, dim=0))


def test_head_count_must_divide_width():
    with pytest.raises(ValueError):
        CrossAttentionLayer(d_model=10, n_heads=4)


def test_empty_and_mismatched_tokens(stack):
    with pytest.raises(ValueError):
        stack(tokens_of(torch.zeros(1, 2, 0, 8, dtype=torch.float64)), torch.zeros(1, 8, dtype=torch.float64))
    with pytest.raises(ValueError):
        stack(tokens_of(torch.zeros(1, 2, 3, 6, dtype=torch.float64)), torch.zeros(1, 6, dtype=torch.float64))
