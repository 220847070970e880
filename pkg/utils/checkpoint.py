"""
Checkpoint directories: manifest.json (class binding, architecture, loss
weights, resolved config, tensor shapes) plus weights.npz. Writes go to a
temporary sibling directory that is renamed into place.
"""

import json
import logging
import os
import shutil
import tempfile

import numpy as np
import torch

from models.roads import RoadsModel
from utils.exceptions import CheckpointError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("Checkpoint")

MANIFEST_FILE = "manifest.json"
WEIGHTS_FILE = "weights.npz"
FORMAT_VERSION = 1


def build_manifest(model, class_names, config, loss_weights):
    state = model.state_dict()
    return {
        "format_version": FORMAT_VERSION,
        "classes": list(class_names),
        "model": model.manifest(),
        "loss_weights": loss_weights.to_dict(),
        "config": config,
        "tensors": {name: list(tensor.shape) for name, tensor in state.items()},
    }


def save_checkpoint(model, path, class_names, config, loss_weights):
    """
    Save a model atomically.

    Args:
        model (RoadsModel): Trained model
        path (str): Checkpoint directory
        class_names (list): Class order the prompt pool is bound to
        config (dict): Resolved run configuration
        loss_weights (LossWeights): Effective loss weights

    Returns:
        str: Checkpoint directory
    """
    if len(class_names) != model.n_classes:
        raise CheckpointError(f"{len(class_names)} class names for a {model.n_classes}-class model")
    path = os.path.abspath(path)
    parent = os.path.dirname(path)
    os.makedirs(parent, exist_ok=True)

    manifest = build_manifest(model, class_names, config, loss_weights)
    arrays = {name: tensor.detach().cpu().numpy() for name, tensor in model.state_dict().items()}

    staging = tempfile.mkdtemp(prefix=".ckpt-", dir=parent)
    try:
        with open(os.path.join(staging, MANIFEST_FILE), "w") as f:
            json.dump(manifest, f, indent=2)
        np.savez(os.path.join(staging, WEIGHTS_FILE), **arrays)
        if os.path.exists(path):
            retired = f"{staging}.old"
            os.replace(path, retired)
            os.replace(staging, path)
            shutil.rmtree(retired, ignore_errors=True)
        else:
            os.replace(staging, path)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    logger.info(f"Saved checkpoint with {len(arrays)} tensors to {path}")
    return path


def read_manifest(path):
    manifest_path = os.path.join(path, MANIFEST_FILE)
    if not os.path.isfile(manifest_path):
        raise CheckpointError(f"No {MANIFEST_FILE} in {path}")
    with open(manifest_path) as f:
        return json.load(f)


def load_checkpoint(path, class_names=None):
    """
    Rebuild a model from a checkpoint directory.

    Args:
        path (str): Checkpoint directory
        class_names (list, optional): Expected class order; mismatch raises CheckpointError

    Returns:
        tuple: (RoadsModel in eval mode, manifest dict)
    """
    manifest = read_manifest(path)
    classes = manifest["classes"]
    if class_names is not None and list(class_names) != classes:
        raise CheckpointError(
            f"Checkpoint is bound to {len(classes)} classes {classes}, dataset has {len(class_names)} {list(class_names)}"
        )

    config = manifest["config"]
    model = RoadsModel.from_config(
        config["model"],
        n_classes=len(classes),
        image_size=manifest["model"]["encoder"]["input_size"],
        seed=config.get("seed", 0),
        pretrained=False,
    )

    weights_path = os.path.join(path, WEIGHTS_FILE)
    if not os.path.isfile(weights_path):
        raise CheckpointError(f"No {WEIGHTS_FILE} in {path}")
    with np.load(weights_path) as blobs:
        arrays = {name: blobs[name] for name in blobs.files}

    expected = model.state_dict()
    missing = sorted(set(expected) - set(arrays))
    unexpected = sorted(set(arrays) - set(expected))
    if missing or unexpected:
        raise CheckpointError(f"Weight names differ from the architecture: missing {missing[:5]}, unexpected {unexpected[:5]}")
    for name, tensor in expected.items():
        if tuple(arrays[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"Shape mismatch for '{name}': checkpoint {arrays[name].shape}, model {tuple(tensor.shape)}"
            )

    dtype = getattr(torch, config.get("train", {}).get("dtype", "float32"))
    model.to(dtype)
    model.load_state_dict({name: torch.from_numpy(array) for name, array in arrays.items()})
    model.eval()
    logger.info(f"Loaded checkpoint from {path} ({len(classes)} classes)")
    return model, manifest
