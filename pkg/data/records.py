"""
Dataset index types shared by the MVTec loader and the toy generator.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from PIL import Image

from utils.exceptions import DataError

SPLITS = ("train", "test")


def read_image(path):
    """
    Read an 8-bit image file as floats in [0, 1].

    Args:
        path (Path): Image file

    Returns:
        ndarray: HxWx3 float32 array
    """
    with Image.open(path) as img:
        array = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return array.astype(np.float32) / 255.0


def read_mask(path):
    """
    Read a single-channel mask file; any nonzero pixel is anomalous.

    Args:
        path (Path): Mask file

    Returns:
        ndarray: HxW bool array
    """
    with Image.open(path) as img:
        array = np.asarray(img.convert("L"))
    return array > 0


@dataclass
class SampleRecord:
    """
    One image of the index, either backed by a file or held in memory.
    """

    class_index: int
    split: str
    label: int
    image_path: Optional[Path] = None
    image: Optional[np.ndarray] = None
    mask_path: Optional[Path] = None
    mask: Optional[np.ndarray] = None
    defect_type: str = "good"
    name: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DataError(f"Unknown split '{self.split}'")
        if self.label not in (0, 1):
            raise DataError(f"Label must be 0 or 1, got {self.label}")
        if self.split == "train" and self.label != 0:
            raise DataError("Only normal samples may appear in the train split")
        if self.image_path is None and self.image is None:
            raise DataError("SampleRecord needs an image path or an in-memory image")

    def load_image(self):
        """
        Get the image as HxWx3 floats in [0, 1].

        Returns:
            ndarray: Image array
        """
        if self.image is not None:
            return self.image
        return read_image(self.image_path)

    def load_mask(self):
        """
        Get the ground-truth mask, all-zero for normal samples.

        Returns:
            ndarray: HxW bool array
        """
        if self.mask is not None:
            return self.mask.astype(bool)
        if self.mask_path is not None:
            return read_mask(self.mask_path)
        height, width = self.load_image().shape[:2]
        return np.zeros((height, width), dtype=bool)


@dataclass
class DatasetIndex:
    """
    Ordered class list plus all sample records.
    The position of a class name in `classes` is its prompt index.
    """

    classes: List[str]
    samples: List[SampleRecord] = field(default_factory=list)

    @property
    def n_classes(self):
        return len(self.classes)

    def split(self, name):
        """
        Get all samples of one split.

        Args:
            name (str): "train" or "test"

        Returns:
            list: Sample records
        """
        return [sample for sample in self.samples if sample.split == name]

    def subset(self, class_names):
        """
        Restrict the index to some classes, keeping the original class order.

        Args:
            class_names (list): Classes to keep

        Returns:
            DatasetIndex: New index with re-numbered class indices
        """
        keep = [name for name in self.classes if name in set(class_names)]
        remap = {self.classes.index(name): i for i, name in enumerate(keep)}
        samples = []
        for sample in self.samples:
            if sample.class_index in remap:
                samples.append(
                    SampleRecord(
                        class_index=remap[sample.class_index],
                        split=sample.split,
                        label=sample.label,
                        image_path=sample.image_path,
                        image=sample.image,
                        mask_path=sample.mask_path,
                        mask=sample.mask,
                        defect_type=sample.defect_type,
                        name=sample.name,
                    )
                )
        return DatasetIndex(classes=keep, samples=samples)

    def validate(self, check_masks=True):
        """
        Check the index invariants and raise DataError on the first violation.

        Args:
            check_masks (bool): Whether to load masks and compare sizes
        """
        if len(set(self.classes)) != len(self.classes):
            raise DataError(f"Duplicate class names in {self.classes}")
        for sample in self.samples:
            if not 0 <= sample.class_index < self.n_classes:
                raise DataError(
                    f"Sample '{sample.name}' has class index {sample.class_index} "
                    f"outside 0..{self.n_classes - 1}"
                )
            if not check_masks:
                continue
            if sample.label == 1:
                mask = sample.load_mask()
                image = sample.load_image()
                if mask.shape != image.shape[:2]:
                    raise DataError(
                        f"Mask of '{sample.name}' has shape {mask.shape}, image has {image.shape[:2]}"
                    )
                if not mask.any():
                    raise DataError(f"Anomalous sample '{sample.name}' has an empty mask")
            elif sample.mask is not None and sample.mask.any():
                raise DataError(f"Normal sample '{sample.name}' has a non-empty mask")

    def to_frame(self):
        """
        Summarize the index as a DataFrame (one row per sample).

        Returns:
            DataFrame: class, split, label, defect_type, name
        """
        rows = [
            {
                "class_name": self.classes[sample.class_index],
                "class_index": sample.class_index,
                "split": sample.split,
                "label": sample.label,
                "defect_type": sample.defect_type,
                "name": sample.name,
            }
            for sample in self.samples
        ]
        return pd.DataFrame(rows, columns=["class_name", "class_index", "split", "label", "defect_type", "name"])
