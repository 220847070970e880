import math

import pytest
import torch

from models.prompts import (
    AnomalyClassifier,
    CrossAttentionBlock,
    MultiHeadCrossAttention,
    PooledClassHead,
    PromptPool,
    PromptStage,
    aggregate_posterior,
    ce_loss,
    classify,
    classify_final,
    init_prompt_pool,
    inject_prompts,
    select_prompts,
)
from tests.helpers import module_gradcheck


def test_pool_initialization_bounds_and_seed():
    pool = init_prompt_pool(5, 4, 12, seed=1)
    assert pool.shape == (5, 4, 12)
    assert pool.abs().max() <= math.sqrt(6.0 / 16)
    assert torch.equal(pool, init_prompt_pool(5, 4, 12, seed=1))
    assert not torch.equal(pool, init_prompt_pool(5, 4, 12, seed=2))
    with pytest.raises(ValueError):
        init_prompt_pool(0, 4, 12)


def test_select():
    pool = PromptPool(3, 2, 8, seed=0)
    assert torch.equal(select_prompts(pool, 1), pool.tokens[1])
    batch = pool.select(torch.tensor([2, 0, 2]))
    assert batch.shape == (3, 2, 8)
    assert torch.equal(batch[0], pool.tokens[2])
    with pytest.raises(IndexError):
        pool.select(3)
    with pytest.raises(IndexError):
        pool.select(torch.tensor([0, -1]))


def test_selection_gradient_reaches_selected_slices_only():
    pool = PromptPool(4, 2, 8, seed=0)
    pool.select(torch.tensor([1, 1, 3])).sum().backward()
    grad = pool.tokens.grad
    assert grad[1].abs().sum() > 0 and grad[3].abs().sum() > 0
    assert torch.equal(grad[0], torch.zeros_like(grad[0]))
    assert torch.equal(grad[2], torch.zeros_like(grad[2]))


def test_attention_weights_are_a_distribution():
    torch.manual_seed(0)
    attention = MultiHeadCrossAttention(8, 2)
    out, weights = attention(torch.randn(3, 4, 8), torch.randn(3, 10, 8), return_weights=True)
    assert out.shape == (3, 4, 8)
    assert weights.shape == (3, 2, 4, 10)
    torch.testing.assert_close(weights.sum(dim=-1), torch.ones(3, 2, 4))
    with pytest.raises(ValueError):
        MultiHeadCrossAttention(10, 3)


def _identity_attention(dim):
    attention = MultiHeadCrossAttention(dim, 1)
    with torch.no_grad():
        for linear in (attention.w_q, attention.w_k, attention.w_v, attention.w_o):
            linear.weight.copy_(torch.eye(dim))
        attention.w_o.bias.zero_()
    return attention


def test_single_key_returns_its_value():
    torch.manual_seed(0)
    attention = _identity_attention(4)
    context = torch.randn(2, 1, 4)
    out, weights = attention(torch.randn(2, 5, 4), context, return_weights=True)
    torch.testing.assert_close(weights, torch.ones(2, 1, 5, 1))
    torch.testing.assert_close(out, context.expand(2, 5, 4))


def test_single_prompt_token_gives_equal_rows():
    torch.manual_seed(1)
    attention = _identity_attention(4)
    features, token = torch.randn(1, 9, 4), torch.randn(1, 1, 4)
    out = attention(features, token)
    for row in range(1, 9):
        torch.testing.assert_close(out[:, row], out[:, 0])


def test_identical_keys_split_attention_evenly():
    attention = _identity_attention(3)
    with torch.no_grad():
        attention.w_k.weight.copy_(torch.diag(torch.tensor([1.0, 1.0, 0.0])))
    context = torch.tensor([[[0.3, -0.2, 1.0], [0.3, -0.2, -3.0]]])
    out, weights = attention(torch.randn(1, 4, 3), context, return_weights=True)
    torch.testing.assert_close(weights, torch.full((1, 1, 4, 2), 0.5))
    torch.testing.assert_close(out, context.mean(dim=1, keepdim=True).expand(1, 4, 3))


def test_weights_ignore_a_shared_score_offset():
    # shifting every key by u adds q.u to all scores of a query row
    torch.manual_seed(2)
    attention = _identity_attention(4)
    query, context = torch.randn(2, 3, 4), torch.randn(2, 6, 4)
    _, base = attention(query, context, return_weights=True)
    _, shifted = attention(query, context + torch.randn(1, 1, 4), return_weights=True)
    torch.testing.assert_close(base, shifted)


def test_block_with_zero_ffn_is_identity():
    block = CrossAttentionBlock(8, 2)
    torch.nn.init.zeros_(block.ffn.fc2.weight)
    torch.nn.init.zeros_(block.ffn.fc2.bias)
    query = torch.randn(2, 3, 8)
    assert torch.equal(block(query, torch.randn(2, 5, 8)), query)


def test_block_rejects_width_mismatch():
    block = CrossAttentionBlock(8, 2)
    with pytest.raises(ValueError):
        block(torch.randn(1, 2, 8), torch.randn(1, 2, 6))


def test_posterior_and_injection_shapes():
    block = CrossAttentionBlock(8, 2)
    tokens, features = torch.randn(2, 3, 8), torch.randn(2, 16, 8)
    assert aggregate_posterior(tokens, features, block).shape == (2, 3, 8)
    assert inject_prompts(features, tokens, block).shape == (2, 16, 8)
    with pytest.raises(ValueError):
        aggregate_posterior(tokens[0], features, block)
    with pytest.raises(ValueError):
        inject_prompts(features, tokens[:1], block)


@pytest.mark.parametrize("seed", range(20))
def test_posterior_block_gradients(seed):
    torch.manual_seed(seed)
    block = CrossAttentionBlock(4, 2, ffn_ratio=2)
    tokens, features = torch.randn(1, 2, 4), torch.randn(1, 5, 4)

    class Aggregate(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.block = block

        def forward(self, t, f):
            return aggregate_posterior(t, f, self.block)

    assert module_gradcheck(Aggregate(), (tokens, features))


@pytest.mark.parametrize("seed", range(20))
def test_injection_block_gradients(seed):
    torch.manual_seed(100 + seed)
    block = CrossAttentionBlock(4, 2, ffn_ratio=2)
    features, posterior = torch.randn(1, 6, 4), torch.randn(1, 2, 4)

    class Inject(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.block = block

        def forward(self, f, p):
            return inject_prompts(f, p, self.block)

    assert module_gradcheck(Inject(), (features, posterior))


def test_prompt_stage_with_zero_output_projection_keeps_features():
    stage = PromptStage(6, 8, 2)
    torch.nn.init.zeros_(stage.from_tokens.weight)
    torch.nn.init.zeros_(stage.from_tokens.bias)
    feature = torch.randn(2, 6, 4, 4)
    out, posterior = stage(feature, torch.randn(2, 3, 8))
    assert torch.equal(out, feature)
    assert posterior.shape == (2, 3, 8)


def test_router_and_final_head():
    torch.manual_seed(0)
    router = AnomalyClassifier(32, 3, 8, hidden=16)
    logits, vector = classify(router, [torch.randn(4, 8, 8, 8), torch.randn(4, 32, 2, 2)])
    assert logits.shape == (4, 3)
    assert vector.shape == (4, 8)

    head = PooledClassHead(8, 3)
    posteriors = [torch.randn(4, 2, 8) for _ in range(3)]
    final = classify_final(head, vector, posteriors)
    assert final.shape == (4, 3)
    tokens = torch.cat([vector.unsqueeze(1)] + posteriors, dim=1)
    torch.testing.assert_close(final, head.linear(tokens.mean(dim=1)))


@pytest.mark.parametrize("n_classes", [2, 5, 15])
def test_uniform_logits_give_log_n(n_classes):
    logits = torch.zeros(7, n_classes, dtype=torch.float64)
    target = torch.arange(7) % n_classes
    assert abs(ce_loss(logits, target).item() - math.log(n_classes)) < 1e-9
