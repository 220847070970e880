"""
Out-of-distribution test corruptions (brightness, contrast, defocus blur,
Gaussian noise) on float images in [0, 1], plus a dataset-level copier.
"""

import concurrent.futures
import logging
import os
import shutil
import zlib
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

import cv2
import numpy as np
from PIL import Image
from skimage.color import hsv2rgb, rgb2hsv

from config.corruptions import CORRUPTION_KINDS, get_severity_params
from data.records import read_image
from utils.exceptions import DataError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("Corruptions")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"Unknown corruption kind '{self.kind}'. Expected one of {CORRUPTION_KINDS}")
        if not 1 <= int(self.severity) <= 5:
            raise ValueError(f"Severity must be in 1..5, got {self.severity}")

    @property
    def tag(self):
        return f"{self.kind}_s{self.severity}"

    def for_image(self, key):
        """
        Same corruption with a per-image seed.

        `key` is the image path relative to the dataset root (a sample name);
        the file suffix is ignored so in-memory and exported copies match.
        """
        stem = PurePosixPath(key).with_suffix("").as_posix()
        return CorruptionSpec(self.kind, self.severity, (self.seed + zlib.crc32(stem.encode())) % 2 ** 64)


def _as_rgb(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image[..., None].repeat(3, axis=-1), True
    return image, False


def brightness(image, shift):
    x = rgb2hsv(image)
    x[:, :, 2] = np.clip(x[:, :, 2] + shift, 0, 1)
    return hsv2rgb(x)


def contrast(image, factor):
    means = np.mean(image, axis=(0, 1), keepdims=True)
    return (image - means) * factor + means


def disk_kernel(radius, alias_blur):
    """Anti-aliased disk kernel used for defocus blur."""
    if radius <= 8:
        support = np.arange(-8, 8 + 1)
        ksize = (3, 3)
    else:
        support = np.arange(-radius, radius + 1)
        ksize = (5, 5)
    xx, yy = np.meshgrid(support, support)
    aliased = np.array((xx ** 2 + yy ** 2) <= radius ** 2, dtype=np.float32)
    aliased /= np.sum(aliased)
    return cv2.GaussianBlur(aliased, ksize=ksize, sigmaX=alias_blur)


def defocus_blur(image, radius, alias_blur):
    kernel = disk_kernel(radius, alias_blur)
    channels = [cv2.filter2D(image[:, :, c], -1, kernel) for c in range(image.shape[2])]
    return np.stack(channels, axis=-1)


def gaussian_noise(image, scale, seed):
    # Legacy RandomState keeps the draws identical to seeding the global numpy generator
    rng = np.random.RandomState(int(seed) & 0xFFFFFFFF)
    return image + rng.normal(size=image.shape, scale=scale)


def corrupt(image, spec):
    """
    Apply one corruption at the configured severity.

    Only gaussian_noise consumes randomness, and it is seeded from the CorruptionSpec,
    so the output is a pure function of (image, spec).

    Args:
        image (ndarray): HxWxC (or HxW) floats in [0, 1]
        spec (CorruptionSpec): Corruption kind, severity and seed

    Returns:
        ndarray: Corrupted float32 image clipped to [0, 1], same shape as input
    """
    if spec.kind not in CORRUPTION_KINDS:
        raise ValueError(f"Unknown corruption kind '{spec.kind}'")
    x, was_gray = _as_rgb(image)
    params = get_severity_params(spec.kind, spec.severity)

    if spec.kind == "brightness":
        out = brightness(x, params)
    elif spec.kind == "contrast":
        out = contrast(x, params)
    elif spec.kind == "defocus_blur":
        out = defocus_blur(x, *params)
    else:
        out = gaussian_noise(x, params, spec.seed)

    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return out[..., 0] if was_gray else out


def _corrupt_file(src, dst, spec):
    image = read_image(src)
    out = corrupt(image, spec)
    os.makedirs(dst.parent, exist_ok=True)
    Image.fromarray(np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)).save(dst)
    return dst


def corrupt_dataset(source_root, target_root, spec, max_workers=4):
    """
    Copy an MVTec-layout dataset, corrupting every test image.

    Train images and ground-truth masks are copied unchanged; corruptions are a
    test-time shift only.

    Args:
        source_root (str or Path): Dataset to read
        target_root (str or Path): Directory to create
        spec (CorruptionSpec): Corruption to apply (seeded per image from its relative path)
        max_workers (int): Thread pool size

    Returns:
        int: Number of corrupted images
    """
    source_root, target_root = Path(source_root), Path(target_root)
    if not source_root.is_dir():
        raise DataError(f"Dataset root {source_root} does not exist")
    if target_root.exists() and any(target_root.iterdir()):
        raise DataError(f"Target directory {target_root} is not empty")

    jobs = []
    for path in sorted(source_root.rglob("*")):
        if not path.is_file():
            continue
        relative = path.relative_to(source_root)
        target = target_root / relative
        if len(relative.parts) >= 3 and relative.parts[1] == "test":
            jobs.append((path, target))
        else:
            os.makedirs(target.parent, exist_ok=True)
            shutil.copy2(path, target)

    done = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {}
        for src, dst in jobs:
            key = src.relative_to(source_root).as_posix()
            futures[executor.submit(_corrupt_file, src, dst, spec.for_image(key))] = src
        for future in concurrent.futures.as_completed(futures):
            try:
                future.result()
                done += 1
            except Exception as e:
                logger.error(f"Error corrupting {futures[future]}: {str(e)}")
                raise

    logger.info(f"Wrote {done} {spec.tag} test images to {target_root}")
    return done
