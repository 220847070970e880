"""
Domain adapter: per-image style codes, AdaIN parameter heads and the style
consistency loss. Inference is a pure forward pass; nothing adapts at test time.
"""

import copy
import logging

import torch
import torch.nn as nn

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("DomainAdapter")

ADAIN_EPS = 1e-5


def adain(feature, gamma, beta, eps=ADAIN_EPS):
    """
    Adaptive instance normalization.

    Per channel: gamma * (x - mean) / (std + eps) + beta, statistics over the
    spatial extent (biased variance).

    Args:
        feature (Tensor): (B, C, H, W)
        gamma (Tensor): (B, C) or (C,)
        beta (Tensor): (B, C) or (C,)
        eps (float): Added to the standard deviation

    Returns:
        Tensor: (B, C, H, W)
    """
    b, c, h, w = feature.shape
    if h * w < 2:
        raise ValueError("AdaIN needs at least 2 spatial positions to estimate a standard deviation")
    if gamma.shape[-1] != c or beta.shape[-1] != c:
        raise ValueError(f"gamma/beta length must equal channel count {c}")
    mean = feature.mean(dim=(2, 3), keepdim=True)
    std = feature.var(dim=(2, 3), keepdim=True, unbiased=False).sqrt()
    normalized = (feature - mean) / (std + eps)
    gamma = gamma.reshape(-1, c, 1, 1)
    beta = beta.reshape(-1, c, 1, 1)
    return gamma * normalized + beta


def _check_norm(code, name):
    norm = code.norm(dim=-1)
    if bool((norm == 0).any()):
        raise ValueError(f"{name} has zero L2 norm; cosine consistency is undefined")
    return norm


def style_consistency_loss(code_id, code_ood):
    """
    1 - cosine similarity of in-distribution and synthetic-OOD style codes,
    averaged over the batch.

    Args:
        code_id (Tensor): (B, D_s) or (D_s,)
        code_ood (Tensor): same shape

    Returns:
        Tensor: Scalar in [0, 2]
    """
    norm_id = _check_norm(code_id, "ID style code")
    norm_ood = _check_norm(code_ood, "OOD style code")
    cos = (code_id * code_ood).sum(dim=-1) / (norm_id * norm_ood)
    return (1.0 - cos).mean()


class AdaINHeads(nn.Module):
    """
    One affine head per AdaIN layer mapping a style code to (gamma, beta).
    Heads start at zero weights with gamma-bias 1 and beta-bias 0, so every
    layer begins as plain instance normalization.
    """

    def __init__(self, style_dim, layer_channels):
        super().__init__()
        self.layer_channels = list(layer_channels)
        self.heads = nn.ModuleList(nn.Linear(style_dim, 2 * c) for c in self.layer_channels)
        self.reset_to_identity()

    def reset_to_identity(self):
        for head, c in zip(self.heads, self.layer_channels):
            nn.init.zeros_(head.weight)
            with torch.no_grad():
                head.bias[:c].fill_(1.0)
                head.bias[c:].zero_()

    def forward(self, code):
        params = []
        for head, c in zip(self.heads, self.layer_channels):
            out = head(code)
            params.append((out[..., :c], out[..., c:]))
        return params


class DomainAdapter(nn.Module):
    """
    Style encoder xi: a residual trunk (the deepest level of an Encoder),
    global pooling and a linear projection to the style dimension, plus the
    per-layer AdaIN heads.

    Args:
        trunk (Encoder): Backbone used as the style trunk
        style_dim (int): D_s
        layer_channels (list): Channels of every AdaIN layer in the decoder
    """

    def __init__(self, trunk, style_dim, layer_channels):
        super().__init__()
        self.trunk = trunk
        self.style_dim = style_dim
        self.trunk_trainable = True
        self.project = nn.Linear(trunk.channels[-1], style_dim)
        self.heads = AdaINHeads(style_dim, layer_channels)

    @classmethod
    def from_encoder(cls, encoder, style_dim, layer_channels):
        """Initialize the trunk as a trainable copy of a (pre-trained) encoder."""
        trunk = copy.deepcopy(encoder)
        for param in trunk.parameters():
            param.requires_grad_(True)
        logger.info(f"Initialized style trunk from '{encoder.name}' weights")
        return cls(trunk, style_dim, layer_channels)

    def set_trunk_trainable(self, trainable):
        self.trunk_trainable = trainable
        for param in self.trunk.parameters():
            param.requires_grad_(trainable)

    def style_code(self, image):
        """
        Style code of each image.

        Args:
            image (Tensor): (B, 3, H, W)

        Returns:
            Tensor: (B, D_s) codes
        """
        code = self.project(self.trunk(image)[-1].mean(dim=(-2, -1)))
        _check_norm(code, "Style code")
        return code

    def adain_params(self, code):
        """
        Per-layer (gamma, beta).

        Args:
            code (Tensor): (B, D_s)

        Returns:
            list: One (gamma, beta) pair of (B, C_k) tensors per AdaIN layer
        """
        return self.heads(code)

    def forward(self, image):
        return self.style_code(image)


def identity_adain_params(layer_channels, batch_size, reference):
    """gamma = 1, beta = 0 for every layer (adapter disabled)."""
    return [
        (reference.new_ones(batch_size, c), reference.new_zeros(batch_size, c))
        for c in layer_channels
    ]
