"""
Evaluation of a trained model on the test split, optionally under a
corruption: anomaly maps, image scores and per-class metrics.
"""

import concurrent.futures
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import torch
from torch.utils.data import DataLoader

from data.torch_dataset import AnomalyImageDataset
from utils.anomaly_map import raw_anomaly_maps, smooth_map
from utils.checkpoint import load_checkpoint
from utils.exceptions import DataError
from utils.metrics import DEFAULT_FPR_LIMIT, DEFAULT_MAX_THRESHOLDS, aupro, auroc, pixel_auroc
from visualizations.heatmaps import save_heatmap

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

METRIC_COLUMNS = ["i_auroc", "p_auroc", "p_aupro"]
ID_CONDITION = "id"


@dataclass
class EvalReport:
    """
    Metrics of one evaluation condition.

    per_class: one row per class (class_name, metrics, router_accuracy, counts)
    aggregate: unweighted mean of the per-class metrics, classes without
               anomalous samples excluded
    scores:    one row per test image
    """

    condition: str
    per_class: pd.DataFrame
    aggregate: dict
    scores: pd.DataFrame
    run: str = None
    meta: dict = field(default_factory=dict)

    def summary(self):
        return {
            "run": self.run,
            "condition": self.condition,
            "aggregate": self.aggregate,
            "per_class": self.per_class.to_dict(orient="records"),
            **self.meta,
        }

    def write(self, out_dir):
        """
        Write summary.json, per_class.csv and scores.csv.

        Args:
            out_dir (str): Target directory (created)

        Returns:
            str: The directory
        """
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.json"), "w") as f:
            json.dump(self.summary(), f, indent=2, default=_json_default)
        self.per_class.to_csv(os.path.join(out_dir, "per_class.csv"), index=False)
        self.scores.to_csv(os.path.join(out_dir, "scores.csv"), index=False)
        return out_dir


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"Cannot serialize {type(value)}")


def _nan_to_none(value):
    return None if value is None or (isinstance(value, float) and np.isnan(value)) else value


class Evaluator:
    """
    Args:
        model (RoadsModel): Trained model
        index (DatasetIndex): Dataset with a test split
        image_size (int): Model input size
        sigma (float): Gaussian smoothing of the maps
        fpr_limit (float): AUPRO integration limit
        max_thresholds (int): AUPRO threshold cap
        batch_size (int): Images per forward pass
        corrupt_before_resize (bool): Corrupt at native resolution
        max_workers (int): Threads used for map smoothing
    """

    def __init__(self, model, index, image_size, sigma=4.0, fpr_limit=DEFAULT_FPR_LIMIT,
                 max_thresholds=DEFAULT_MAX_THRESHOLDS, batch_size=32, corrupt_before_resize=True,
                 max_workers=4):
        self.logger = logging.getLogger(self.__class__.__name__)
        if model.n_classes != index.n_classes:
            raise DataError(f"Model has {model.n_classes} classes, dataset has {index.n_classes}")
        if not index.split("test"):
            raise DataError("Dataset has no test split")
        self.model = model
        self.index = index
        self.image_size = image_size
        self.sigma = sigma
        self.fpr_limit = fpr_limit
        self.max_thresholds = max_thresholds
        self.batch_size = batch_size
        self.corrupt_before_resize = corrupt_before_resize
        self.max_workers = max_workers

    def predict(self, corruption=None, heatmap_dir=None):
        """
        Anomaly maps for every test image.

        Returns:
            tuple: (list of AnomalyMap, list of masks, DataFrame of per-image rows)
        """
        dataset = AnomalyImageDataset(
            self.index, "test", self.image_size, corruption=corruption,
            corrupt_before_resize=self.corrupt_before_resize,
        )
        loader = DataLoader(dataset, batch_size=self.batch_size, shuffle=False)
        dtype = next(self.model.parameters()).dtype
        condition = corruption.tag if corruption is not None else ID_CONDITION

        self.model.eval()
        raws, masks, images, rows = [], [], [], []
        with torch.no_grad():
            for batch in loader:
                output = self.model(batch["image"].to(dtype))
                raws.extend(raw_anomaly_maps(output.teacher, output.student, self.image_size))
                masks.extend(batch["mask"].numpy().astype(bool))
                if heatmap_dir:
                    images.extend(batch["image"].numpy().transpose(0, 2, 3, 1))
                routed = output.routed_class.tolist() if output.routed_class is not None else [None] * len(batch["label"])
                for position, routed_class in zip(batch["position"].tolist(), routed):
                    sample = dataset.samples[position]
                    rows.append({
                        "name": sample.name,
                        "class_name": self.index.classes[sample.class_index],
                        "class_index": sample.class_index,
                        "defect_type": sample.defect_type,
                        "label": sample.label,
                        "routed_class": routed_class,
                        "condition": condition,
                    })

        with concurrent.futures.ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            maps = list(executor.map(lambda raw: smooth_map(raw, self.sigma), raws))

        scores = pd.DataFrame(rows)
        scores["image_score"] = [m.image_score for m in maps]

        if heatmap_dir:
            for row, anomaly_map, image in zip(rows, maps, images):
                path = os.path.join(heatmap_dir, row["name"].replace("/", "_") + ".png")
                save_heatmap(path, anomaly_map.map, image)
            self.logger.info(f"Wrote {len(rows)} heatmaps to {heatmap_dir}")

        return maps, masks, scores

    def _class_metrics(self, class_index, maps, masks, scores):
        rows = scores.index[scores["class_index"] == class_index].tolist()
        labels = scores.loc[rows, "label"].to_numpy()
        class_name = self.index.classes[class_index]
        result = {
            "class_name": class_name,
            "n_normal": int((labels == 0).sum()),
            "n_anomalous": int((labels == 1).sum()),
        }
        if self.model.use_prompts:
            result["router_accuracy"] = float((scores.loc[rows, "routed_class"] == class_index).mean())
        else:
            result["router_accuracy"] = float("nan")

        if result["n_anomalous"] == 0 or result["n_normal"] == 0:
            self.logger.warning(f"Class '{class_name}' lacks normal or anomalous test samples; metrics are NaN")
            result.update({key: float("nan") for key in METRIC_COLUMNS})
            return result

        class_maps = [maps[i].map for i in rows]
        class_masks = [masks[i] for i in rows]
        result["i_auroc"] = auroc(scores.loc[rows, "image_score"].to_numpy(), labels)
        result["p_auroc"] = pixel_auroc(class_maps, class_masks)
        result["p_aupro"] = aupro(class_maps, class_masks, self.fpr_limit, self.max_thresholds)
        return result

    def evaluate(self, corruption=None, heatmap_dir=None, run=None):
        """
        Evaluate every class under one condition.

        Args:
            corruption (CorruptionSpec, optional): Applied to every test image
            heatmap_dir (str, optional): Write per-image heatmaps here
            run (str, optional): Run label (e.g. preset name) stored in the report

        Returns:
            EvalReport: Per-class and aggregate metrics plus the score table
        """
        maps, masks, scores = self.predict(corruption, heatmap_dir)
        per_class = pd.DataFrame(
            [self._class_metrics(c, maps, masks, scores) for c in range(self.index.n_classes)]
        )
        per_class = per_class[["class_name"] + METRIC_COLUMNS + ["router_accuracy", "n_normal", "n_anomalous"]]

        aggregate = {key: _nan_to_none(float(np.nanmean(per_class[key]))) if per_class[key].notna().any() else None
                     for key in METRIC_COLUMNS}
        if self.model.use_prompts:
            aggregate["router_accuracy"] = float((scores["routed_class"] == scores["class_index"]).mean())
        else:
            aggregate["router_accuracy"] = None

        condition = corruption.tag if corruption is not None else ID_CONDITION
        self.logger.info(
            f"[{condition}] I-AUROC {aggregate['i_auroc']}, P-AUROC {aggregate['p_auroc']}, "
            f"P-AUPRO {aggregate['p_aupro']}"
        )
        meta = {"severity": corruption.severity if corruption else None,
                "kind": corruption.kind if corruption else None}
        return EvalReport(condition=condition, per_class=per_class, aggregate=aggregate,
                          scores=scores, run=run, meta=meta)


def evaluate(checkpoint, index, corruption=None, eval_config=None, image_size=None, heatmap_dir=None,
             corrupt_before_resize=True):
    """
    Load a checkpoint and evaluate it on a dataset.

    Args:
        checkpoint (str): Checkpoint directory
        index (DatasetIndex): Dataset; its class order must match the checkpoint
        corruption (CorruptionSpec, optional): Test-time corruption
        eval_config (dict, optional): `eval` config section
        image_size (int, optional): Defaults to the checkpoint's input size
        heatmap_dir (str, optional): Write heatmaps here
        corrupt_before_resize (bool): Corruption protocol knob

    Returns:
        EvalReport: Report of this condition
    """
    eval_config = eval_config or {}
    model, manifest = load_checkpoint(checkpoint, class_names=index.classes)
    image_size = image_size or manifest["model"]["encoder"]["input_size"]
    evaluator = Evaluator(
        model,
        index,
        image_size,
        sigma=eval_config.get("sigma", 4.0),
        fpr_limit=eval_config.get("fpr_limit", DEFAULT_FPR_LIMIT),
        max_thresholds=eval_config.get("max_thresholds", DEFAULT_MAX_THRESHOLDS),
        batch_size=eval_config.get("batch_size", 32),
        corrupt_before_resize=corrupt_before_resize,
    )
    run = eval_config.get("tag") or manifest["config"].get("preset") or os.path.basename(os.path.normpath(checkpoint))
    return evaluator.evaluate(corruption, heatmap_dir=heatmap_dir, run=run)
