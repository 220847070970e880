"""
Registry of teacher encoders.
The factory resolves an entry's module and class at runtime, so a new backbone
only needs a class implementing the Encoder interface and a line here.
"""

ENCODER_REGISTRY = {
    "toy_resnet": {
        "module": "models.backbone",
        "class": "ToyResNetEncoder",
        "description": "Compact residual CNN pre-trained on toy class labels",
    },
    "wide_resnet50": {
        "module": "models.backbone",
        "class": "WideResNetEncoder",
        "description": "torchvision Wide-ResNet50-2, layers 1-3 (channels 256/512/1024)",
    },
}


def get_encoder_entry(name):
    """
    Get the registry entry for an encoder.

    Args:
        name (str): Encoder name

    Returns:
        dict: Registry entry or None if not found
    """
    return ENCODER_REGISTRY.get(name)


def get_encoder_names():
    """
    Get all registered encoder names.

    Returns:
        list: Encoder names
    """
    return list(ENCODER_REGISTRY.keys())
