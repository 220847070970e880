"""
Synthetic out-of-distribution augmentation for training the domain adapter.

Only point-wise colour operations are used (hue/saturation jitter, posterize,
solarize). None of them blurs, adds noise, or rescales brightness/contrast, so
the training shift never overlaps the four test corruptions.
"""

import numpy as np
from PIL import Image, ImageOps
from skimage.color import hsv2rgb, rgb2hsv

AUGMENT_OPS = ["color", "posterize", "solarize"]


def color_jitter(image, saturation=1.0, hue_shift=0.0):
    """
    Scale saturation and rotate hue.

    Args:
        image (ndarray): HxWx3 floats in [0, 1]
        saturation (float): Saturation multiplier
        hue_shift (float): Hue rotation in turns

    Returns:
        ndarray: Adjusted image
    """
    hsv = rgb2hsv(image)
    hsv[..., 0] = np.mod(hsv[..., 0] + hue_shift, 1.0)
    hsv[..., 1] = np.clip(hsv[..., 1] * saturation, 0.0, 1.0)
    return hsv2rgb(hsv)


def _to_pil(image):
    return Image.fromarray(np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8))


def _from_pil(img):
    return np.asarray(img, dtype=np.float64) / 255.0


def posterize(image, bits):
    """
    Keep the top `bits` bits of every 8-bit channel value.

    Args:
        image (ndarray): HxWx3 or HxW floats in [0, 1]
        bits (int): 1..8, 8 is the identity on 8-bit data

    Returns:
        ndarray: Posterized image
    """
    if not 1 <= bits <= 8:
        raise ValueError(f"bits must be in 1..8, got {bits}")
    return _from_pil(ImageOps.posterize(_to_pil(image), int(bits)))


def solarize(image, threshold):
    """
    Invert every 8-bit value strictly above the threshold.

    Args:
        image (ndarray): HxWx3 or HxW floats in [0, 1]
        threshold (float): Inversion threshold, 1.0 leaves the image unchanged

    Returns:
        ndarray: Solarized image
    """
    # ImageOps inverts values >= its integer threshold
    cutoff = int(np.floor(threshold * 255.0 + 1e-6)) + 1
    return _from_pil(ImageOps.solarize(_to_pil(image), cutoff))


def augment_ood(image, seed, ops=None):
    """
    Produce a synthetic OOD view of a normal image.

    A non-empty subset of the colour ops is applied in a fixed order with
    parameters drawn from `seed`.

    Args:
        image (ndarray): HxWx3 floats in [0, 1]
        seed (int or sequence of int): Seed for op selection and parameters
        ops (list, optional): Restrict to these ops (all applied)

    Returns:
        ndarray: float32 image in [0, 1]
    """
    rng = np.random.default_rng(seed)
    if ops is None:
        chosen = rng.random(len(AUGMENT_OPS)) < 0.5
        if not chosen.any():
            chosen[rng.integers(len(AUGMENT_OPS))] = True
        ops = [op for op, keep in zip(AUGMENT_OPS, chosen) if keep]
    unknown = [op for op in ops if op not in AUGMENT_OPS]
    if unknown:
        raise ValueError(f"Unknown augmentation ops {unknown}")

    out = np.asarray(image, dtype=np.float64)
    # Parameters are always drawn so each op sees the same values regardless of subset
    saturation = rng.uniform(0.3, 1.7)
    hue_shift = rng.uniform(-0.15, 0.15)
    bits = int(rng.integers(2, 6))
    threshold = rng.uniform(0.55, 0.9)

    if "color" in ops:
        out = color_jitter(out, saturation, hue_shift)
    if "posterize" in ops:
        out = posterize(out, bits)
    if "solarize" in ops:
        out = solarize(out, threshold)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
