"""
Per-image anomaly heatmap PNGs.
"""

import logging
import os

import cv2
import numpy as np

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("Heatmaps")


def min_max_norm(values):
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    if high - low <= 0:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def to_heatmap(anomaly_map):
    """
    Colour-map a score grid (min-max normalized, JET).

    Args:
        anomaly_map (ndarray): (H, W) scores

    Returns:
        ndarray: (H, W, 3) uint8 BGR image
    """
    gray = np.uint8(np.round(min_max_norm(anomaly_map) * 255))
    return cv2.applyColorMap(gray, cv2.COLORMAP_JET)


def overlay(image, heatmap, alpha=0.5):
    """Blend an RGB float image in [0, 1] with a BGR heatmap."""
    bgr = cv2.cvtColor(np.uint8(np.round(np.clip(image, 0, 1) * 255)), cv2.COLOR_RGB2BGR)
    return cv2.addWeighted(heatmap, alpha, bgr, 1.0 - alpha, 0)


def save_heatmap(path, anomaly_map, image=None):
    """
    Write a heatmap PNG; with an image the map is drawn next to its overlay.

    Args:
        path (str): Output file
        anomaly_map (ndarray): (H, W) scores
        image (ndarray, optional): (H, W, 3) RGB floats in [0, 1]

    Returns:
        str: Written path
    """
    heatmap = to_heatmap(anomaly_map)
    if image is not None:
        heatmap = np.concatenate([overlay(image, heatmap), heatmap], axis=1)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if not cv2.imwrite(path, heatmap):
        logger.warning(f"Could not write heatmap {path}")
    return path
