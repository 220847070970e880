"""
Procedural multi-class defect data for desk-scale experiments.

Each class is a texture family (stripes, checker, dots, rings) with its own
orientation, frequency and colour. Anomalous samples are normal images with one
analytic defect painted in, so the ground-truth mask is exact.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from skimage.color import hsv2rgb

from data.records import DatasetIndex, SampleRecord
from utils.exceptions import ConfigError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("ToyGenerator")

TEXTURE_FAMILIES = ["stripes", "checker", "dots", "rings"]
DEFECT_KINDS = ["scratch", "blob", "hole"]

_SPLIT_CODES = {"train": 0, "test_normal": 1, "test_anomalous": 2}


@dataclass
class ToySpec:
    n_classes: int = 4
    image_size: int = 32
    n_train: int = 200
    n_test_normal: int = 20
    n_test_anomalous: int = 20
    defect_kinds: List[str] = field(default_factory=lambda: list(DEFECT_KINDS))
    seed: int = 7

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError(f"toy.n_classes must be >= 2, got {self.n_classes}")
        if self.image_size < 32:
            raise ConfigError(f"toy.image_size must be >= 32, got {self.image_size}")
        for key in ("n_train", "n_test_normal", "n_test_anomalous"):
            if getattr(self, key) < 1:
                raise ConfigError(f"toy.{key} must be >= 1")
        unknown = [kind for kind in self.defect_kinds if kind not in DEFECT_KINDS]
        if unknown or not self.defect_kinds:
            raise ConfigError(f"toy.defect_kinds must be a non-empty subset of {DEFECT_KINDS}, got {self.defect_kinds}")


def class_name(class_index):
    family = TEXTURE_FAMILIES[class_index % len(TEXTURE_FAMILIES)]
    return f"{class_index:02d}_{family}"


def _class_palette(class_index, n_classes):
    hue = (class_index / n_classes + 0.07) % 1.0
    dark = hsv2rgb(np.array([[[hue, 0.7, 0.25]]]))[0, 0]
    light = hsv2rgb(np.array([[[(hue + 0.08) % 1.0, 0.45, 0.85]]]))[0, 0]
    return dark, light


def _texture(class_index, size, rng):
    """Intensity pattern in [0, 1] for one normal image."""
    family = TEXTURE_FAMILIES[class_index % len(TEXTURE_FAMILIES)]
    variant = class_index // len(TEXTURE_FAMILIES)
    coords = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    phase = rng.uniform(0, 2 * np.pi)
    jitter = rng.uniform(0.93, 1.07)

    if family == "stripes":
        theta = np.deg2rad(30 + 47 * variant + rng.uniform(-5, 5))
        freq = jitter * (4 + 2 * variant) / size
        pattern = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    elif family == "checker":
        period = size / (4 + 2 * variant) * jitter
        offset = rng.uniform(0, period, size=2)
        sx = np.sin(np.pi * (xx + offset[0]) / period)
        sy = np.sin(np.pi * (yy + offset[1]) / period)
        pattern = 0.5 + 0.5 * np.tanh(4 * sx * sy)
    elif family == "dots":
        spacing = size / (4 + variant) * jitter
        offset = rng.uniform(0, spacing, size=2)
        dx = np.mod(xx + offset[0], spacing) - spacing / 2
        dy = np.mod(yy + offset[1], spacing) - spacing / 2
        pattern = np.exp(-(dx ** 2 + dy ** 2) / (2 * (spacing / 6) ** 2))
    else:
        center = size / 2 + rng.uniform(-size / 8, size / 8, size=2)
        radius = np.hypot(xx - center[0], yy - center[1])
        freq = jitter * (5 + 2 * variant) / size
        pattern = 0.5 + 0.5 * np.cos(2 * np.pi * freq * radius + phase)
    return np.clip(pattern, 0.0, 1.0)


def _render_normal(class_index, n_classes, size, rng):
    dark, light = _class_palette(class_index, n_classes)
    pattern = _texture(class_index, size, rng)[..., None]
    return dark * (1 - pattern) + light * pattern


def _defect_color(image):
    return 1.0 if image.mean() < 0.5 else 0.0


def _add_scratch(image, rng):
    size = image.shape[0]
    length = rng.uniform(0.35, 0.8) * size
    angle = rng.uniform(0, np.pi)
    center = rng.uniform(0.3 * size, 0.7 * size, size=2)
    half = 0.5 * length * np.array([np.cos(angle), np.sin(angle)])
    p0, p1 = center - half, center + half
    width = rng.uniform(1.0, 2.0)

    coords = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    points = np.stack([xx, yy], axis=-1)
    seg = p1 - p0
    t = np.clip(((points - p0) @ seg) / (seg @ seg), 0.0, 1.0)
    dist = np.linalg.norm(points - (p0 + t[..., None] * seg), axis=-1)

    # Anti-aliased coverage; every pixel with nonzero coverage is in the mask
    alpha = np.clip(width / 2 + 0.5 - dist, 0.0, 1.0)
    mask = alpha > 0
    color = _defect_color(image)
    out = image * (1 - alpha[..., None]) + color * alpha[..., None]
    return out, mask


def _add_blob(image, rng):
    size = image.shape[0]
    sigma = rng.uniform(size / 16, size / 10)
    cy, cx = rng.integers(int(0.2 * size), int(0.8 * size), size=2)
    coords = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
    mask = bump > 0.5
    weight = np.where(mask, bump, 0.0)[..., None]
    color = np.array([0.9, 0.2, 0.1]) if image.mean() < 0.5 else np.array([0.1, 0.2, 0.6])
    out = image * (1 - weight) + color * weight
    return out, mask


def _add_hole(image, rng):
    size = image.shape[0]
    radius = rng.uniform(size / 12, size / 7)
    cy, cx = rng.integers(int(0.2 * size), int(0.8 * size), size=2)
    coords = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    out = image.copy()
    out[mask] = 0.03
    return out, mask


DEFECT_PAINTERS = {
    "scratch": _add_scratch,
    "blob": _add_blob,
    "hole": _add_hole,
}


def _quantize(image):
    return (np.rint(np.clip(image, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def generate_toy_dataset(spec):
    """
    Generate an in-memory multi-class defect dataset.

    The output is a pure function of the ToySpec: every image is drawn from its own
    generator seeded by (seed, class, split, position).

    Args:
        spec (ToySpec): Generation parameters

    Returns:
        DatasetIndex: Index whose records hold in-memory images and masks
    """
    classes = [class_name(i) for i in range(spec.n_classes)]
    samples = []
    size = spec.image_size

    for class_index in range(spec.n_classes):
        for i in range(spec.n_train):
            rng = np.random.default_rng([spec.seed, class_index, _SPLIT_CODES["train"], i])
            image = _quantize(_render_normal(class_index, spec.n_classes, size, rng))
            samples.append(
                SampleRecord(class_index=class_index, split="train", label=0, image=image,
                             name=f"{classes[class_index]}/train/good/{i:03d}")
            )

        for i in range(spec.n_test_normal):
            rng = np.random.default_rng([spec.seed, class_index, _SPLIT_CODES["test_normal"], i])
            image = _quantize(_render_normal(class_index, spec.n_classes, size, rng))
            samples.append(
                SampleRecord(class_index=class_index, split="test", label=0, image=image,
                             name=f"{classes[class_index]}/test/good/{i:03d}")
            )

        for i in range(spec.n_test_anomalous):
            rng = np.random.default_rng([spec.seed, class_index, _SPLIT_CODES["test_anomalous"], i])
            normal = _render_normal(class_index, spec.n_classes, size, rng)
            kind = spec.defect_kinds[i % len(spec.defect_kinds)]
            image, mask = DEFECT_PAINTERS[kind](normal, rng)
            samples.append(
                SampleRecord(class_index=class_index, split="test", label=1, image=_quantize(image),
                             mask=mask, defect_type=kind,
                             name=f"{classes[class_index]}/test/{kind}/{i // len(spec.defect_kinds):03d}")
            )

    index = DatasetIndex(classes=classes, samples=samples)
    logger.info(f"Generated toy dataset: {spec.n_classes} classes, {len(samples)} samples, size {size}")
    return index
