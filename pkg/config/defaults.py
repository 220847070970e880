"""
Default configuration for training and evaluating the anomaly detector.
Every command reads from one nested dictionary; user files and CLI flags only
override keys that already exist here.
"""

import copy

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "runs/default",
    "preset": None,

    # Dataset location; when root is None the toy generator is used in memory
    "data": {
        "root": None,
        "layout": "mvtec",
        "image_size": 32,
        "corrupt_before_resize": True,
        "num_workers": 0,
    },

    "toy": {
        "n_classes": 4,
        "image_size": 32,
        "n_train": 200,
        "n_test_normal": 20,
        "n_test_anomalous": 20,
        "defect_kinds": ["scratch", "blob", "hole"],
        "seed": 7,
    },

    "model": {
        "encoder": "toy_resnet",
        "encoder_channels": [32, 64, 128],
        "encoder_pretrained": False,
        "encoder_pretrain_epochs": 3,
        "embed_channels": 128,
        "blocks_per_stage": 2,
        "prompt_length": 4,
        "prompt_dim": 64,
        "num_heads": 4,
        "ffn_ratio": 2,
        "style_dim": 64,
        "classifier_hidden": 128,
        "prompt_position": "after_blocks",
        "use_prompts": True,
        "use_adapter": True,
    },

    "train": {
        "epochs": 10,
        "batch_size": 32,
        "lr": 2e-3,
        "weight_decay": 1e-4,
        "min_lr_ratio": 0.01,
        "adapter_trunk": "finetune",
        "adapter_lr_scale": 0.1,
        "kd_form": "rd",
        "dtype": "float32",
        "log_every": 10,
        "loss_weights": {
            "kd": 0.95,
            "ce": 0.025,
            "cs": 0.025,
        },
    },

    "eval": {
        "checkpoint": None,
        "corruption": None,
        "severity": 3,
        "corruption_seed": 0,
        "sigma": 4.0,
        "fpr_limit": 0.3,
        "max_thresholds": 5000,
        "batch_size": 32,
        "heatmaps": False,
        "tag": None,
    },

    "corrupt": {
        "source": None,
        "kind": None,
        "severity": 3,
        "seed": 0,
        "max_workers": 4,
    },

    "report": {
        "inputs": [],
    },
}


def get_default_config():
    """
    Get a deep copy of the default configuration.

    Returns:
        dict: Fresh nested configuration dictionary
    """
    return copy.deepcopy(DEFAULT_CONFIG)
