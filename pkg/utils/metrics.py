"""
Detection and localization metrics: image/pixel AUROC and the per-region
overlap curve (AUPRO).
"""

import numpy as np
from scipy.integrate import trapezoid
from skimage.measure import label
from sklearn.metrics import roc_auc_score

DEFAULT_FPR_LIMIT = 0.3
DEFAULT_MAX_THRESHOLDS = 5000


def auroc(scores, labels):
    """
    Area under the ROC curve (ties count one half).

    Args:
        scores (array-like): Higher means more anomalous
        labels (array-like): 0 normal, 1 anomalous

    Returns:
        float: AUROC in [0, 1]
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).astype(int).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    if np.unique(labels).size < 2:
        raise ValueError("AUROC needs both normal and anomalous labels")
    return float(roc_auc_score(labels, scores))


def pixel_auroc(maps, masks):
    """AUROC over all pixels of all maps."""
    scores = np.concatenate([np.asarray(m, dtype=np.float64).ravel() for m in maps])
    labels = np.concatenate([np.asarray(m, dtype=bool).ravel() for m in masks])
    return auroc(scores, labels)


def _as_array(anomaly_map):
    return np.asarray(getattr(anomaly_map, "map", anomaly_map), dtype=np.float64)


def pro_curve(maps, masks, max_thresholds=DEFAULT_MAX_THRESHOLDS):
    """
    False-positive rate and mean per-region overlap for descending thresholds.

    A pixel is detected at threshold t when its score is >= t. Every distinct
    score is a threshold; with more than `max_thresholds` distinct scores an
    evenly spaced subset of them (quantiles) is used. Regions are the
    8-connected components of the masks.

    Args:
        maps (list): AnomalyMap objects or (H, W) arrays
        masks (list): (H, W) boolean ground truth
        max_thresholds (int): Cap on the number of thresholds

    Returns:
        tuple: (fpr, pro) arrays starting at (0, 0) and ending at (1, 1)
    """
    if len(maps) != len(masks):
        raise ValueError(f"{len(maps)} maps for {len(masks)} masks")
    if not maps:
        raise ValueError("No maps to evaluate")

    scores, background, weights = [], [], []
    regions = []
    for anomaly_map, mask in zip(maps, masks):
        values = _as_array(anomaly_map)
        mask = np.asarray(mask, dtype=bool)
        if values.shape != mask.shape:
            raise ValueError(f"Map shape {values.shape} differs from mask shape {mask.shape}")
        components = label(mask, connectivity=2)
        regions.append(components)
        scores.append(values.ravel())
        background.append(~mask.ravel())

    n_regions = sum(int(c.max()) for c in regions)
    if n_regions == 0:
        raise ValueError("Masks contain no anomalous regions")
    for components in regions:
        flat = components.ravel()
        sizes = np.bincount(flat)
        w = np.zeros(flat.shape, dtype=np.float64)
        inside = flat > 0
        w[inside] = 1.0 / (sizes[flat[inside]] * n_regions)
        weights.append(w)

    scores = np.concatenate(scores)
    background = np.concatenate(background)
    weights = np.concatenate(weights)
    n_background = int(background.sum())
    if n_background == 0:
        raise ValueError("Masks cover every pixel; the false-positive rate is undefined")

    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    fpr = np.cumsum(background[order]) / n_background
    pro = np.cumsum(weights[order])

    # last position of every run of equal scores
    ends = np.flatnonzero(np.diff(scores) != 0)
    ends = np.append(ends, scores.size - 1)
    if ends.size > max_thresholds:
        picks = np.unique(np.linspace(0, ends.size - 1, max_thresholds).round().astype(int))
        ends = ends[picks]
        if ends[-1] != scores.size - 1:
            ends = np.append(ends, scores.size - 1)

    fpr = np.concatenate([[0.0], fpr[ends]])
    pro = np.concatenate([[0.0], np.minimum(pro[ends], 1.0)])
    return fpr, pro


def area_under_curve(x, y, x_limit):
    """
    Trapezoid area under y(x) on [0, x_limit], with linear interpolation at the limit.

    Args:
        x (ndarray): Non-decreasing abscissae starting at 0
        y (ndarray): Ordinates
        x_limit (float): Upper integration bound

    Returns:
        float: Area
    """
    cut = int(np.searchsorted(x, x_limit, side="right"))
    xs, ys = list(x[:cut]), list(y[:cut])
    if cut < len(x) and xs[-1] < x_limit:
        x0, x1, y0, y1 = x[cut - 1], x[cut], y[cut - 1], y[cut]
        xs.append(x_limit)
        ys.append(y0 + (y1 - y0) * (x_limit - x0) / (x1 - x0))
    return float(trapezoid(ys, xs))


def aupro(maps, masks, fpr_limit=DEFAULT_FPR_LIMIT, max_thresholds=DEFAULT_MAX_THRESHOLDS):
    """
    Normalized area under the PRO-vs-FPR curve up to `fpr_limit`.

    Args:
        maps (list): AnomalyMap objects or (H, W) arrays
        masks (list): (H, W) boolean ground truth, aligned with maps
        fpr_limit (float): Integration limit in (0, 1]
        max_thresholds (int): Cap on the number of thresholds

    Returns:
        float: AUPRO in [0, 1]
    """
    if not 0 < fpr_limit <= 1:
        raise ValueError(f"fpr_limit must be in (0, 1], got {fpr_limit}")
    fpr, pro = pro_curve(maps, masks, max_thresholds)
    return area_under_curve(fpr, pro, fpr_limit) / fpr_limit
