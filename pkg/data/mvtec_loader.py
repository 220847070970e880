"""
Indexing datasets on disk and exporting in-memory ones.

MVTec layout:

    root/<class>/train/good/*.png
    root/<class>/test/good/*.png
    root/<class>/test/<defect>/*.png
    root/<class>/ground_truth/<defect>/<stem>_mask.png

VISA layout: images and masks anywhere under root, listed with their split and
label in root/split_csv/1cls.csv (columns object, split, label, image, mask;
label is "normal" or "anomaly", paths relative to root).
"""

import logging
import os
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image

from data.records import DatasetIndex, SampleRecord
from utils.exceptions import DataError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("MVTecLoader")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
SUPPORTED_LAYOUTS = ("mvtec", "visa")
VISA_SPLIT_CSV = Path("split_csv") / "1cls.csv"


def _list_images(folder):
    return sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _find_mask(gt_folder, image_path):
    for suffix in IMAGE_SUFFIXES:
        candidate = gt_folder / f"{image_path.stem}_mask{suffix}"
        if candidate.exists():
            return candidate
    # Some exports keep the image file name unchanged
    candidate = gt_folder / image_path.name
    return candidate if candidate.exists() else None


def _check_mask_size(image_path, mask_path):
    with Image.open(image_path) as img, Image.open(mask_path) as mask:
        if img.size != mask.size:
            raise DataError(f"Mask {mask_path} has size {mask.size}, image {image_path} has {img.size}")


def _mvtec_samples(root, classes):
    samples = []
    for class_index, class_name in enumerate(classes):
        class_dir = root / class_name

        train_dir = class_dir / "train" / "good"
        for path in _list_images(train_dir) if train_dir.is_dir() else []:
            samples.append(
                SampleRecord(
                    class_index=class_index,
                    split="train",
                    label=0,
                    image_path=path,
                    name=f"{class_name}/train/good/{path.name}",
                )
            )

        test_dir = class_dir / "test"
        if not test_dir.is_dir():
            logger.info(f"Class '{class_name}' has no test split")
            continue

        for defect_dir in sorted(d for d in test_dir.iterdir() if d.is_dir()):
            defect = defect_dir.name
            is_good = defect == "good"
            gt_dir = class_dir / "ground_truth" / defect
            for path in _list_images(defect_dir):
                mask_path = None
                if not is_good:
                    mask_path = _find_mask(gt_dir, path) if gt_dir.is_dir() else None
                    if mask_path is None:
                        raise DataError(f"Missing ground-truth mask for anomalous sample {path}")
                    _check_mask_size(path, mask_path)
                samples.append(
                    SampleRecord(
                        class_index=class_index,
                        split="test",
                        label=0 if is_good else 1,
                        image_path=path,
                        mask_path=mask_path,
                        defect_type=defect,
                        name=f"{class_name}/test/{defect}/{path.name}",
                    )
                )
    return samples


def _visa_samples(root):
    split_csv = root / VISA_SPLIT_CSV
    if not split_csv.is_file():
        raise DataError(f"VISA split file {split_csv} not found")
    frame = pd.read_csv(split_csv)
    missing = {"object", "split", "label", "image", "mask"} - set(frame.columns)
    if missing:
        raise DataError(f"{split_csv} lacks columns {sorted(missing)}")

    classes = sorted(frame["object"].astype(str).unique())
    samples = []
    for row in frame.itertuples(index=False):
        split = str(row.split).strip().lower()
        is_good = str(row.label).strip().lower() == "normal"
        path = root / str(row.image)
        if not path.is_file():
            raise DataError(f"Image {path} listed in {split_csv} does not exist")
        defect = "good" if is_good else "anomaly"

        mask_path = None
        if not is_good:
            if pd.isna(row.mask) or not (root / str(row.mask)).is_file():
                raise DataError(f"Missing ground-truth mask for anomalous sample {path}")
            mask_path = root / str(row.mask)
            _check_mask_size(path, mask_path)
        samples.append(
            SampleRecord(
                class_index=classes.index(str(row.object)),
                split=split,
                label=0 if is_good else 1,
                image_path=path,
                mask_path=mask_path,
                defect_type=defect,
                name=f"{row.object}/{split}/{defect}/{path.name}",
            )
        )
    return classes, samples


def load_dataset(root, layout="mvtec"):
    """
    Index a dataset directory.

    Class order is lexicographic and defines the class index used for prompt
    selection. For "mvtec" every subdirectory of the root is a class; for
    "visa" the classes are the objects listed in split_csv/1cls.csv.

    Args:
        root (str or Path): Dataset root
        layout (str): "mvtec" or "visa"

    Returns:
        DatasetIndex: Indexed dataset (images are loaded lazily)
    """
    if layout not in SUPPORTED_LAYOUTS:
        raise DataError(f"Unsupported layout '{layout}'. Expected one of {SUPPORTED_LAYOUTS}")

    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Dataset root {root} does not exist")

    if layout == "visa":
        classes, samples = _visa_samples(root)
    else:
        classes = sorted(d.name for d in root.iterdir() if d.is_dir() and not d.name.startswith("."))
        samples = _mvtec_samples(root, classes)
    if not classes:
        raise DataError(f"No class directories under {root}")

    trained = {s.class_index for s in samples if s.split == "train"}
    for class_index, class_name in enumerate(classes):
        if class_index not in trained:
            raise DataError(f"Class '{class_name}' has an empty train split")

    index = DatasetIndex(classes=classes, samples=samples)
    logger.info(
        f"Loaded {len(index.split('train'))} train and {len(index.split('test'))} test samples "
        f"for {index.n_classes} classes from {root}"
    )
    return index


def _to_uint8(image):
    return np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def export_dataset(index, root):
    """
    Write an index (typically in-memory toy data) to disk in MVTec layout.

    Args:
        index (DatasetIndex): Dataset to write
        root (str or Path): Target directory

    Returns:
        Path: The dataset root
    """
    root = Path(root)
    counters = {}
    for sample in index.samples:
        class_name = index.classes[sample.class_index]
        folder = root / class_name / sample.split / sample.defect_type
        os.makedirs(folder, exist_ok=True)

        key = (class_name, sample.split, sample.defect_type)
        number = counters.get(key, 0)
        counters[key] = number + 1
        stem = f"{number:03d}"

        Image.fromarray(_to_uint8(sample.load_image())).save(folder / f"{stem}.png")
        if sample.label == 1:
            gt_folder = root / class_name / "ground_truth" / sample.defect_type
            os.makedirs(gt_folder, exist_ok=True)
            mask = sample.load_mask().astype(np.uint8) * 255
            Image.fromarray(mask).save(gt_folder / f"{stem}_mask.png")

    logger.info(f"Exported {len(index.samples)} samples of {index.n_classes} classes to {root}")
    return root
