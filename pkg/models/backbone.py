"""
Teacher encoders and the trainable bottleneck of the reverse-distillation model.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

FEATURE_SOURCES = ("teacher", "student")


@dataclass
class FeatureMapSet:
    """
    Multi-scale feature pyramid, shallowest level first.
    Each level is a (B, C_i, H_i, W_i) tensor.
    """

    levels: List[torch.Tensor]
    source: str = "teacher"

    def __post_init__(self):
        if self.source not in FEATURE_SOURCES:
            raise ValueError(f"source must be one of {FEATURE_SOURCES}, got '{self.source}'")
        if len(self.levels) < 2:
            raise ValueError(f"A feature pyramid needs at least 2 levels, got {len(self.levels)}")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    def __iter__(self):
        return iter(self.levels)

    def shapes(self):
        """Per-level (C, H, W) without the batch axis."""
        return [tuple(level.shape[1:]) for level in self.levels]


def conv3x3(in_planes, out_planes, stride=1):
    return nn.Conv2d(in_planes, out_planes, kernel_size=3, stride=stride, padding=1, bias=False)


def conv1x1(in_planes, out_planes, stride=1):
    return nn.Conv2d(in_planes, out_planes, kernel_size=1, stride=stride, bias=False)


class BasicBlock(nn.Module):
    """Two 3x3 convolutions with an identity or projected shortcut."""

    def __init__(self, in_planes, planes, stride=1):
        super().__init__()
        self.conv1 = conv3x3(in_planes, planes, stride)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = conv3x3(planes, planes)
        self.bn2 = nn.BatchNorm2d(planes)
        self.relu = nn.ReLU()
        self.shortcut = None
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Sequential(conv1x1(in_planes, planes, stride), nn.BatchNorm2d(planes))

    def forward(self, x):
        identity = x if self.shortcut is None else self.shortcut(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class Encoder(nn.Module, ABC):
    """
    Interface every teacher backbone implements.
    Subclasses set `channels`, `strides` and `input_size` and return one
    tensor per level from `forward`, shallowest first.
    """

    name = "encoder"

    def __init__(self, channels, strides, input_size):
        super().__init__()
        self.channels = tuple(int(c) for c in channels)
        self.strides = tuple(int(s) for s in strides)
        self.input_size = int(input_size)
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def forward(self, x) -> List[torch.Tensor]:
        pass

    def encode(self, x):
        """
        Extract the teacher pyramid.

        Args:
            x (Tensor): (B, 3, H, W) images at the configured input size

        Returns:
            FeatureMapSet: Teacher features
        """
        if x.dim() != 4 or tuple(x.shape[-2:]) != (self.input_size, self.input_size):
            raise ValueError(
                f"Expected input (B, 3, {self.input_size}, {self.input_size}), got {tuple(x.shape)}"
            )
        return FeatureMapSet(list(self.forward(x)), source="teacher")

    def level_shapes(self, input_size=None):
        size = input_size or self.input_size
        return [(c, size // s, size // s) for c, s in zip(self.channels, self.strides)]

    def freeze(self):
        """Fix all parameters and BatchNorm statistics."""
        for param in self.parameters():
            param.requires_grad_(False)
        self.eval()
        return self

    def manifest(self):
        return {
            "name": self.name,
            "channels": list(self.channels),
            "strides": list(self.strides),
            "input_size": self.input_size,
        }


class ToyResNetEncoder(Encoder):
    """
    Compact residual CNN with levels at strides 4, 8, 16.

    Args:
        channels (list): Channels per level, e.g. [32, 64, 128]
        input_size (int): Expected square input size
        in_channels (int): Image channels
    """

    name = "toy_resnet"

    def __init__(self, channels=(32, 64, 128), input_size=32, in_channels=3, **kwargs):
        if len(channels) < 2:
            raise ValueError("ToyResNetEncoder needs at least 2 levels")
        strides = [4 * 2 ** i for i in range(len(channels))]
        super().__init__(channels, strides, input_size)
        self.stem = nn.Sequential(
            conv3x3(in_channels, self.channels[0], stride=2),
            nn.BatchNorm2d(self.channels[0]),
            nn.ReLU(),
        )
        layers = []
        in_planes = self.channels[0]
        for planes in self.channels:
            layers.append(BasicBlock(in_planes, planes, stride=2))
            in_planes = planes
        self.layers = nn.ModuleList(layers)

        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")

    def forward(self, x):
        out = self.stem(x)
        features = []
        for layer in self.layers:
            out = layer(out)
            features.append(out)
        return features


class WideResNetEncoder(Encoder):
    """
    torchvision Wide-ResNet50-2 truncated after layer3 (strides 4, 8, 16).

    Args:
        input_size (int): Expected square input size (256 in the RD setup)
        pretrained (bool): Load ImageNet weights
    """

    name = "wide_resnet50"
    IMAGENET_MEAN = (0.485, 0.456, 0.406)
    IMAGENET_STD = (0.229, 0.224, 0.225)

    def __init__(self, input_size=256, pretrained=True, **kwargs):
        super().__init__((256, 512, 1024), (4, 8, 16), input_size)
        from torchvision.models import Wide_ResNet50_2_Weights, wide_resnet50_2

        weights = Wide_ResNet50_2_Weights.IMAGENET1K_V1 if pretrained else None
        net = wide_resnet50_2(weights=weights)
        self.stem = nn.Sequential(net.conv1, net.bn1, net.relu, net.maxpool)
        self.layers = nn.ModuleList([net.layer1, net.layer2, net.layer3])
        self.register_buffer("mean", torch.tensor(self.IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(self.IMAGENET_STD).view(1, 3, 1, 1))
        self.logger.info(f"Built Wide-ResNet50-2 encoder (pretrained={pretrained})")

    def forward(self, x):
        out = self.stem((x - self.mean) / self.std)
        features = []
        for layer in self.layers:
            out = layer(out)
            features.append(out)
        return features


class Bottleneck(nn.Module):
    """
    Compress the teacher pyramid into one embedding at the deepest resolution:
    strided-conv downsampling per level, concatenation, 1x1 projection, one
    residual block.

    Args:
        channels (list): Teacher channels per level
        strides (list): Teacher strides per level
        out_channels (int): Embedding channels
    """

    def __init__(self, channels, strides, out_channels):
        super().__init__()
        self.channels = tuple(channels)
        self.out_channels = out_channels
        deepest = strides[-1]
        downsamplers = []
        for c, s in zip(channels, strides):
            factor = deepest // s
            steps = int(round(math.log2(factor))) if factor > 1 else 0
            if 2 ** steps != factor:
                raise ValueError(f"Stride ratio {factor} is not a power of two")
            ops = []
            for _ in range(steps):
                ops += [conv3x3(c, c, stride=2), nn.BatchNorm2d(c), nn.ReLU()]
            downsamplers.append(nn.Sequential(*ops) if ops else nn.Identity())
        self.downsamplers = nn.ModuleList(downsamplers)
        self.fuse = nn.Sequential(
            conv1x1(sum(channels), out_channels),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(),
        )
        self.block = BasicBlock(out_channels, out_channels)

    def forward(self, features):
        levels = list(features)
        if len(levels) != len(self.downsamplers):
            raise ValueError(f"Bottleneck expects {len(self.downsamplers)} levels, got {len(levels)}")
        target = levels[-1].shape[-2:]
        pooled = []
        for level, down in zip(levels, self.downsamplers):
            out = down(level)
            if out.shape[-2:] != target:
                out = F.adaptive_avg_pool2d(out, target)
            pooled.append(out)
        return self.block(self.fuse(torch.cat(pooled, dim=1)))


def compress(bottleneck, features):
    """
    Embedding of a teacher pyramid.

    Args:
        bottleneck (Bottleneck): Trainable compressor
        features (FeatureMapSet): Output of Encoder.encode

    Returns:
        Tensor: (B, C_phi, H_M, W_M) embedding
    """
    return bottleneck(features)
