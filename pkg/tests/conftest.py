import copy

import pytest
import torch

from config.defaults import get_default_config
from data.toy_generator import ToySpec, generate_toy_dataset
from models.backbone import ToyResNetEncoder
from utils.config_loader import merge_config

TINY_OVERRIDES = {
    "seed": 3,
    "toy": {"n_classes": 2, "image_size": 32, "n_train": 8, "n_test_normal": 3, "n_test_anomalous": 3, "seed": 11},
    "model": {
        "encoder_channels": [8, 16, 32],
        "encoder_pretrain_epochs": 0,
        "embed_channels": 16,
        "blocks_per_stage": 1,
        "prompt_length": 2,
        "prompt_dim": 8,
        "num_heads": 2,
        "ffn_ratio": 2,
        "style_dim": 8,
        "classifier_hidden": 16,
    },
    "train": {"epochs": 1, "batch_size": 8, "log_every": 1},
    "eval": {"batch_size": 8},
}


def make_config(**sections):
    """Tiny configuration with extra per-section overrides."""
    config = merge_config(get_default_config(), TINY_OVERRIDES)
    return merge_config(config, sections)


@pytest.fixture
def tiny_config():
    return make_config()


@pytest.fixture(scope="session")
def tiny_index():
    spec = ToySpec(**copy.deepcopy(TINY_OVERRIDES["toy"]))
    return generate_toy_dataset(spec)


@pytest.fixture
def encoder():
    torch.manual_seed(0)
    return ToyResNetEncoder(channels=(8, 16, 32), input_size=32).freeze()
