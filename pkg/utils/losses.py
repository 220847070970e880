"""
Training objectives: feature distillation, router/prompt cross-entropy and
their weighted combination.
"""

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F

from utils.exceptions import ConfigError, NumericalError

KD_FORMS = ("rd", "literal")
NORM_EPS = 1e-8


@dataclass
class LossWeights:
    """eta (kd), delta (ce), mu (cs)."""

    kd: float = 0.95
    ce: float = 0.025
    cs: float = 0.025

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ConfigError(f"Loss weight '{name}' must be >= 0, got {value}")

    @classmethod
    def from_config(cls, weights, use_prompts=True, use_adapter=True):
        """
        Build from `train.loss_weights`, zeroing the terms of disabled components.

        Args:
            weights (dict): {"kd", "ce", "cs"}
            use_prompts (bool): L_CE is active only with prompts
            use_adapter (bool): L_CS is active only with the adapter

        Returns:
            LossWeights: Effective weights
        """
        return cls(
            kd=float(weights["kd"]),
            ce=float(weights["ce"]) if use_prompts else 0.0,
            cs=float(weights["cs"]) if use_adapter else 0.0,
        )

    def to_dict(self):
        return asdict(self)


def channel_cosine(a, b, eps=NORM_EPS):
    """
    Cosine similarity of channel vectors at every position.

    Args:
        a (Tensor): (B, C, H, W)
        b (Tensor): (B, C, H, W)

    Returns:
        Tensor: (B, H, W)
    """
    if a.shape != b.shape:
        raise ValueError(f"Feature shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    norm_a = a.norm(dim=1).clamp_min(eps)
    norm_b = b.norm(dim=1).clamp_min(eps)
    return (a * b).sum(dim=1) / (norm_a * norm_b)


def channel_cosine_distance(a, b, eps=NORM_EPS):
    return 1.0 - channel_cosine(a, b, eps)


def kd_loss(teacher, student, form="rd"):
    """
    Distillation loss between teacher and student pyramids.

    rd:      sum over levels of the mean (1 - cos) over batch and positions, in [0, 2M]
    literal: 1 - sum over levels of the mean cos

    Args:
        teacher (FeatureMapSet or list): Teacher levels
        student (FeatureMapSet or list): Student levels
        form (str): "rd" or "literal"

    Returns:
        Tensor: Scalar loss
    """
    if form not in KD_FORMS:
        raise ConfigError(f"kd_form must be one of {KD_FORMS}, got '{form}'")
    teacher, student = list(teacher), list(student)
    if len(teacher) != len(student):
        raise ValueError(f"Level counts differ: {len(teacher)} vs {len(student)}")
    if form == "rd":
        return sum(channel_cosine_distance(t, s).mean() for t, s in zip(teacher, student))
    return 1.0 - sum(channel_cosine(t, s).mean() for t, s in zip(teacher, student))


def classification_loss(router_logits, final_logits, target):
    """
    L_CE: mean of the router and final-head cross-entropies.

    Args:
        router_logits (Tensor): (B, N)
        final_logits (Tensor): (B, N)
        target (LongTensor): (B,) class indices

    Returns:
        Tensor: Scalar loss
    """
    return 0.5 * (F.cross_entropy(router_logits, target) + F.cross_entropy(final_logits, target))


def _check_finite(value, name):
    tensor = torch.as_tensor(value)
    if not bool(torch.isfinite(tensor).all()):
        raise NumericalError(f"Loss term {name} is not finite ({tensor.detach().cpu().tolist()})")


def total_loss(l_kd, l_ce, l_cs, weights):
    """
    eta * L_KD + delta * L_CE + mu * L_CS

    Args:
        l_kd, l_ce, l_cs (Tensor or float): Loss terms
        weights (LossWeights): Effective weights

    Returns:
        Tensor or float: Weighted sum
    """
    for value, name in ((l_kd, "l_kd"), (l_ce, "l_ce"), (l_cs, "l_cs")):
        _check_finite(value, name)
    return weights.kd * l_kd + weights.ce * l_ce + weights.cs * l_cs
