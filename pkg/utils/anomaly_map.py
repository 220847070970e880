"""
Anomaly maps from teacher/student feature discrepancy.
"""

from dataclasses import dataclass

import numpy as np
import torch.nn.functional as F
from scipy.ndimage import gaussian_filter

from utils.losses import channel_cosine_distance


@dataclass
class AnomalyMap:
    """Smoothed per-pixel scores and the image score (their maximum)."""

    map: np.ndarray
    image_score: float

    @classmethod
    def from_scores(cls, scores):
        scores = np.asarray(scores, dtype=np.float64)
        return cls(map=scores, image_score=float(scores.max()))


def raw_anomaly_maps(teacher, student, out_size=None):
    """
    Sum over levels of the upsampled (1 - cos) maps, before smoothing.

    Args:
        teacher (FeatureMapSet or list): Teacher levels
        student (FeatureMapSet or list): Student levels
        out_size (int, optional): Output side; defaults to the shallowest level size

    Returns:
        ndarray: (B, out_size, out_size) float64 maps
    """
    teacher, student = list(teacher), list(student)
    if len(teacher) != len(student):
        raise ValueError(f"Level counts differ: {len(teacher)} vs {len(student)}")
    if out_size is None:
        out_size = teacher[0].shape[-1]
    total = None
    for t, s in zip(teacher, student):
        distance = channel_cosine_distance(t.detach(), s.detach()).unsqueeze(1)
        if tuple(distance.shape[-2:]) != (out_size, out_size):
            distance = F.interpolate(distance, size=(out_size, out_size), mode="bilinear", align_corners=True)
        total = distance if total is None else total + distance
    return total[:, 0].cpu().double().numpy()


def smooth_map(raw, sigma=4.0):
    """
    Gaussian-smooth one raw map and take its maximum.

    Args:
        raw (ndarray): (H, W) raw map
        sigma (float): Gaussian sigma; 0 disables smoothing

    Returns:
        AnomalyMap: Smoothed map and image score
    """
    scores = gaussian_filter(raw, sigma=sigma) if sigma > 0 else np.array(raw, dtype=np.float64)
    return AnomalyMap.from_scores(scores)


def anomaly_map(teacher, student, out_size=None, sigma=4.0):
    """
    Per-image anomaly maps for a batch.

    Args:
        teacher (FeatureMapSet): Teacher pyramid
        student (FeatureMapSet): Student pyramid
        out_size (int, optional): Model input size
        sigma (float): Gaussian smoothing sigma

    Returns:
        list: One AnomalyMap per image
    """
    return [smooth_map(raw, sigma) for raw in raw_anomaly_maps(teacher, student, out_size)]
