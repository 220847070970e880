"""
PyTorch Dataset over a DatasetIndex split.
"""

import cv2
import numpy as np
import torch
from torch.utils.data import Dataset

from data.augment import augment_ood
from data.corruptions import corrupt


def resize_image(image, size):
    if image.shape[0] == size and image.shape[1] == size:
        return image
    return cv2.resize(image, (size, size), interpolation=cv2.INTER_LINEAR)


def resize_mask(mask, size):
    if mask.shape[0] == size and mask.shape[1] == size:
        return mask
    return cv2.resize(mask.astype(np.uint8), (size, size), interpolation=cv2.INTER_NEAREST) > 0


def to_tensor(image):
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1), dtype=np.float32))


class AnomalyImageDataset(Dataset):
    """
    Serve one split of an index as model-ready tensors.

    Args:
        index (DatasetIndex): Source index
        split (str): "train" or "test"
        image_size (int): Model input resolution
        corruption (CorruptionSpec, optional): Test-time corruption
        corrupt_before_resize (bool): Corrupt at native resolution, then resize
        with_ood (bool): Also return an augment_ood view (training only)
        seed (int): Base seed for the OOD views
    """

    def __init__(self, index, split, image_size, corruption=None, corrupt_before_resize=True,
                 with_ood=False, seed=0):
        if corruption is not None and split == "train":
            raise ValueError("Corruptions are test-only; refusing to corrupt the train split")
        self.index = index
        self.samples = index.split(split)
        self.split = split
        self.image_size = image_size
        self.corruption = corruption
        self.corrupt_before_resize = corrupt_before_resize
        self.with_ood = with_ood
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = epoch

    def __len__(self):
        return len(self.samples)

    def _prepare(self, position):
        sample = self.samples[position]
        image = sample.load_image()
        if self.corruption is not None:
            spec = self.corruption.for_image(sample.name or str(position))
            if self.corrupt_before_resize:
                image = resize_image(corrupt(image, spec), self.image_size)
            else:
                image = corrupt(resize_image(image, self.image_size), spec)
        else:
            image = resize_image(image, self.image_size)
        return sample, np.asarray(image, dtype=np.float32)

    def __getitem__(self, position):
        sample, image = self._prepare(position)
        item = {
            "image": to_tensor(image),
            "label": sample.label,
            "class_index": sample.class_index,
            "position": position,
        }
        if self.split == "test":
            mask = resize_mask(sample.load_mask(), self.image_size)
            item["mask"] = torch.from_numpy(mask.astype(np.uint8))
        if self.with_ood:
            ood_seed = [self.seed, self.epoch, position]
            item["image_ood"] = to_tensor(augment_ood(image, ood_seed))
        return item
