"""
Hierarchical class-aware prompt integration.

A pool of learnable class tokens is routed per image, absorbs image evidence
from the student features through cross-attention (posterior tokens) and is
injected back into the features through a mirrored cross-attention block.
Posterior tokens of all scales plus the router's feature vector feed a
pooled classification head.
"""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def init_prompt_pool(n_classes, length, dim, seed=0, dtype=torch.float32):
    """
    Xavier-uniform class token pool.

    Each (length, dim) slice is drawn with fan_in = length and fan_out = dim,
    i.e. bound sqrt(6 / (length + dim)).

    Args:
        n_classes (int): Number of classes N
        length (int): Tokens per class l
        dim (int): Token width M_t
        seed (int): Generator seed

    Returns:
        Tensor: (N, l, M_t) pool
    """
    if min(n_classes, length, dim) < 1:
        raise ValueError(f"Prompt pool dims must be positive, got ({n_classes}, {length}, {dim})")
    generator = torch.Generator().manual_seed(int(seed))
    bound = math.sqrt(6.0 / (length + dim))
    pool = torch.empty(n_classes, length, dim, dtype=dtype)
    pool.uniform_(-bound, bound, generator=generator)
    return pool


class PromptPool(nn.Module):
    """Learnable (N, l, M_t) class prior tokens."""

    def __init__(self, n_classes, length, dim, seed=0):
        super().__init__()
        self.tokens = nn.Parameter(init_prompt_pool(n_classes, length, dim, seed))

    @property
    def n_classes(self):
        return self.tokens.shape[0]

    def select(self, class_index):
        """
        Class-specific tokens.

        Args:
            class_index (int or LongTensor): One index or a (B,) batch of indices

        Returns:
            Tensor: (l, M_t) slice or (B, l, M_t) batch; gradients reach only the selected slices
        """
        if isinstance(class_index, int):
            if not 0 <= class_index < self.n_classes:
                raise IndexError(f"Class index {class_index} outside 0..{self.n_classes - 1}")
            return self.tokens[class_index]
        index = torch.as_tensor(class_index, dtype=torch.long, device=self.tokens.device)
        if index.numel() and (index.min() < 0 or index.max() >= self.n_classes):
            raise IndexError(f"Class indices {index.tolist()} outside 0..{self.n_classes - 1}")
        return self.tokens[index]


def select_prompts(pool, class_index):
    return pool.select(class_index)


class MultiHeadCrossAttention(nn.Module):
    """
    softmax(Q K^T / sqrt(d_k)) V with queries from one sequence and keys/values
    from another, split over heads, concatenated and projected.
    """

    def __init__(self, dim, num_heads):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError(f"Token width {dim} is not divisible by {num_heads} heads")
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.w_q = nn.Linear(dim, dim, bias=False)
        self.w_k = nn.Linear(dim, dim, bias=False)
        self.w_v = nn.Linear(dim, dim, bias=False)
        self.w_o = nn.Linear(dim, dim)

    def _split(self, x):
        b, n, _ = x.shape
        return x.view(b, n, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, query, context, return_weights=False):
        q = self._split(self.w_q(query))
        k = self._split(self.w_k(context))
        v = self._split(self.w_v(context))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        weights = scores.softmax(dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(query.shape[0], query.shape[1], self.dim)
        out = self.w_o(out)
        return (out, weights) if return_weights else out


class FeedForward(nn.Module):
    def __init__(self, dim, ratio=2):
        super().__init__()
        self.fc1 = nn.Linear(dim, dim * ratio)
        self.fc2 = nn.Linear(dim * ratio, dim)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))


class CrossAttentionBlock(nn.Module):
    """
    out = FFN(LN(MCA(LN(q), LN(ctx)) + q)) + q

    Used for both directions: tokens attending to features (posterior tokens)
    and features attending to posterior tokens (prompt injection).
    """

    def __init__(self, dim, num_heads, ffn_ratio=2):
        super().__init__()
        self.dim = dim
        self.norm_query = nn.LayerNorm(dim)
        self.norm_context = nn.LayerNorm(dim)
        self.attention = MultiHeadCrossAttention(dim, num_heads)
        self.norm_out = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_ratio)

    def forward(self, query, context):
        if query.shape[-1] != self.dim or context.shape[-1] != self.dim:
            raise ValueError(
                f"Token width mismatch: block {self.dim}, query {query.shape[-1]}, context {context.shape[-1]}"
            )
        attended = self.attention(self.norm_query(query), self.norm_context(context))
        return self.ffn(self.norm_out(attended + query)) + query


def aggregate_posterior(tokens, features, block):
    """
    Posterior tokens: class tokens query the flattened student features.

    Args:
        tokens (Tensor): (B, l, M_t) class tokens
        features (Tensor): (B, n, M_t) flattened student features, n = H*W
        block (CrossAttentionBlock): Aggregation block of this scale

    Returns:
        Tensor: (B, l, M_t) posterior tokens
    """
    if tokens.dim() != 3 or features.dim() != 3 or tokens.shape[0] != features.shape[0]:
        raise ValueError(f"Expected (B, l, M_t) and (B, n, M_t), got {tuple(tokens.shape)} and {tuple(features.shape)}")
    return block(tokens, features)


def inject_prompts(features, posterior, block):
    """
    Prompt-enhanced features: flattened features query the posterior tokens.

    Args:
        features (Tensor): (B, n, M_t)
        posterior (Tensor): (B, l, M_t)
        block (CrossAttentionBlock): Injection block of this scale

    Returns:
        Tensor: (B, n, M_t) enhanced features
    """
    if features.dim() != 3 or posterior.dim() != 3 or features.shape[0] != posterior.shape[0]:
        raise ValueError(f"Expected (B, n, M_t) and (B, l, M_t), got {tuple(features.shape)} and {tuple(posterior.shape)}")
    return block(features, posterior)


class PromptStage(nn.Module):
    """
    Prompt integration at one decoder scale, with 1x1 channel adapters between
    the stage width C_i and the token width M_t. The injected update is added
    back as a residual, so zeroed attention/FFN leave the feature untouched.
    """

    def __init__(self, channels, dim, num_heads, ffn_ratio=2):
        super().__init__()
        self.to_tokens = nn.Conv2d(channels, dim, kernel_size=1)
        self.from_tokens = nn.Conv2d(dim, channels, kernel_size=1)
        self.aggregate = CrossAttentionBlock(dim, num_heads, ffn_ratio)
        self.inject = CrossAttentionBlock(dim, num_heads, ffn_ratio)

    def forward(self, feature, tokens):
        b, _, h, w = feature.shape
        flat = self.to_tokens(feature).flatten(2).transpose(1, 2)
        posterior = aggregate_posterior(tokens, flat, self.aggregate)
        enhanced = inject_prompts(flat, posterior, self.inject)
        delta = (enhanced - flat).transpose(1, 2).reshape(b, -1, h, w)
        return feature + self.from_tokens(delta), posterior


class _ConvPool(nn.Module):
    def __init__(self, in_planes, planes):
        super().__init__()
        self.conv = nn.Conv2d(in_planes, planes, kernel_size=3, padding=1, bias=False)
        self.bn = nn.BatchNorm2d(planes)

    def forward(self, x):
        x = F.relu(self.bn(self.conv(x)))
        if min(x.shape[-2:]) >= 2:
            x = F.max_pool2d(x, 2)
        return x


class AnomalyClassifier(nn.Module):
    """
    Router over the deepest teacher level: two conv-pool blocks, global pooling,
    MLP head for class logits, and a projection of the pooled feature to the
    token width (the classifier's posterior vector).
    """

    def __init__(self, in_channels, n_classes, dim, hidden=128):
        super().__init__()
        self.blocks = nn.Sequential(_ConvPool(in_channels, hidden), _ConvPool(hidden, hidden))
        self.head = nn.Sequential(nn.Linear(hidden, hidden), nn.ReLU(), nn.Linear(hidden, n_classes))
        self.to_token = nn.Linear(hidden, dim)

    def forward(self, deepest):
        pooled = self.blocks(deepest).mean(dim=(-2, -1))
        return self.head(pooled), self.to_token(pooled)


def classify(classifier, features):
    """
    Route by teacher features.

    Args:
        classifier (AnomalyClassifier): Router
        features (FeatureMapSet or list): Teacher pyramid (deepest level is used)

    Returns:
        tuple: (B, N) logits and (B, M_t) posterior vector
    """
    return classifier(features[-1])


class PooledClassHead(nn.Module):
    """Linear(GAP over tokens)."""

    def __init__(self, dim, n_classes):
        super().__init__()
        self.linear = nn.Linear(dim, n_classes)

    def forward(self, tokens):
        return self.linear(tokens.mean(dim=1))


def classify_final(head, posterior_vector, posteriors):
    """
    Final class logits from the concatenated posterior tokens.

    Args:
        head (PooledClassHead): GAP + linear head
        posterior_vector (Tensor): (B, M_t) router vector, used as one extra token
        posteriors (list): (B, l, M_t) posterior tokens per scale

    Returns:
        Tensor: (B, N) logits
    """
    tokens = torch.cat([posterior_vector.unsqueeze(1)] + list(posteriors), dim=1)
    return head(tokens)


def ce_loss(logits, target):
    return F.cross_entropy(logits, target)
