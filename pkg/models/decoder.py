"""
Student decoder: mirrors the teacher from the deepest level up, with
AdaIN-modulated residual blocks and prompt integration at every scale.
"""

from dataclasses import asdict, dataclass, field
from typing import List

import torch.nn as nn
import torch.nn.functional as F

from models.adapter import adain, identity_adain_params
from models.backbone import FeatureMapSet, conv1x1, conv3x3
from models.prompts import PromptStage

PROMPT_POSITIONS = ("after_blocks", "before_upsample")


@dataclass
class DecoderStage:
    level: int
    in_channels: int
    channels: int
    upsample: int
    adain_layers: List[int] = field(default_factory=list)
    prompt_channels: int = 0


@dataclass
class DecoderManifest:
    stages: List[DecoderStage]
    prompt_position: str
    use_prompts: bool

    def level_channels(self):
        """Output channels per teacher level, shallowest first."""
        return [stage.channels for stage in sorted(self.stages, key=lambda s: s.level)]

    def adain_channels(self):
        channels = []
        for stage in self.stages:
            channels += [stage.channels] * len(stage.adain_layers)
        return channels

    def to_dict(self):
        return asdict(self)


class AdaINResBlock(nn.Module):
    """conv-ReLU-conv-AdaIN plus identity shortcut."""

    def __init__(self, channels):
        super().__init__()
        self.conv1 = conv3x3(channels, channels)
        self.conv2 = conv3x3(channels, channels)

    def forward(self, x, gamma, beta):
        out = F.relu(self.conv1(x))
        out = adain(self.conv2(out), gamma, beta)
        return F.relu(out + x)


class Decoder(nn.Module):
    """
    Args:
        channels (list): Teacher channels per level, shallowest first
        strides (list): Teacher strides per level
        embed_channels (int): Bottleneck channels C_phi
        blocks_per_stage (int): AdaIN residual blocks per stage
        prompt_dim (int): Token width M_t
        num_heads (int): Attention heads
        use_prompts (bool): Build prompt integration stages
        prompt_position (str): "after_blocks" or "before_upsample"
        ffn_ratio (int): Hidden expansion of the attention FFNs
    """

    def __init__(self, channels, strides, embed_channels, blocks_per_stage=2, prompt_dim=64,
                 num_heads=4, use_prompts=True, prompt_position="after_blocks", ffn_ratio=2):
        super().__init__()
        if prompt_position not in PROMPT_POSITIONS:
            raise ValueError(f"prompt_position must be one of {PROMPT_POSITIONS}, got '{prompt_position}'")
        self.channels = list(channels)
        self.strides = list(strides)
        self.use_prompts = use_prompts
        self.prompt_position = prompt_position

        stages, entries, blocks, prompt_stages = [], [], [], []
        adain_counter = 0
        in_channels = embed_channels
        for level in reversed(range(len(channels))):
            c = channels[level]
            is_deepest = level == len(channels) - 1
            factor = 1 if is_deepest else strides[level + 1] // strides[level]
            if is_deepest:
                entries.append(nn.Sequential(conv1x1(in_channels, c), nn.ReLU()))
            else:
                entries.append(nn.Sequential(nn.Upsample(scale_factor=factor, mode="nearest"),
                                             conv3x3(in_channels, c), nn.ReLU()))
            blocks.append(nn.ModuleList(AdaINResBlock(c) for _ in range(blocks_per_stage)))

            prompt_channels = c if prompt_position == "after_blocks" else in_channels
            if use_prompts:
                prompt_stages.append(PromptStage(prompt_channels, prompt_dim, num_heads, ffn_ratio))
            stages.append(
                DecoderStage(
                    level=level,
                    in_channels=in_channels,
                    channels=c,
                    upsample=factor,
                    adain_layers=list(range(adain_counter, adain_counter + blocks_per_stage)),
                    prompt_channels=prompt_channels if use_prompts else 0,
                )
            )
            adain_counter += blocks_per_stage
            in_channels = c

        self.entries = nn.ModuleList(entries)
        self.blocks = nn.ModuleList(blocks)
        self.prompt_stages = nn.ModuleList(prompt_stages)
        self.manifest = DecoderManifest(stages=stages, prompt_position=prompt_position, use_prompts=use_prompts)

    @property
    def adain_channels(self):
        return self.manifest.adain_channels()

    def forward(self, embedding, tokens=None, adain_params=None):
        """
        Reconstruct the teacher pyramid.

        Args:
            embedding (Tensor): (B, C_phi, H_M, W_M)
            tokens (Tensor, optional): (B, l, M_t) routed class tokens; required when prompts are on
            adain_params (list, optional): (gamma, beta) per AdaIN layer; identity when None

        Returns:
            tuple: FeatureMapSet (student, shallowest first) and list of posterior tokens per scale
        """
        if self.use_prompts and tokens is None:
            raise ValueError("Decoder was built with prompts; class tokens are required")
        if adain_params is None:
            adain_params = identity_adain_params(self.adain_channels, embedding.shape[0], embedding)
        if len(adain_params) != len(self.adain_channels):
            raise ValueError(f"Expected {len(self.adain_channels)} AdaIN parameter pairs, got {len(adain_params)}")

        outputs, posteriors = [], []
        x = embedding
        for k, stage in enumerate(self.manifest.stages):
            if self.use_prompts and self.prompt_position == "before_upsample":
                x, posterior = self.prompt_stages[k](x, tokens)
                posteriors.append(posterior)
            x = self.entries[k](x)
            for block, layer in zip(self.blocks[k], stage.adain_layers):
                gamma, beta = adain_params[layer]
                x = block(x, gamma, beta)
            if self.use_prompts and self.prompt_position == "after_blocks":
                x, posterior = self.prompt_stages[k](x, tokens)
                posteriors.append(posterior)
            outputs.append(x)

        outputs.reverse()
        posteriors.reverse()
        return FeatureMapSet(outputs, source="student"), posteriors

    def check_mirror(self, teacher_shapes):
        """
        Raise if the decoder cannot reproduce the teacher level shapes.

        Args:
            teacher_shapes (list): (C, H, W) per teacher level
        """
        if [s[0] for s in teacher_shapes] != self.channels:
            raise ValueError(f"Decoder channels {self.channels} do not mirror teacher {teacher_shapes}")
