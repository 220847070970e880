"""
Ablation presets.
roads-0..roads-3 switch the prompt and adapter components on and off,
roads-4..roads-7 vary the loss weights with everything enabled.
Weights are (mu -> cs, delta -> ce, eta -> kd).
"""

ABLATION_PRESETS = {
    # Components
    "roads-0": {
        "description": "Plain reverse distillation, only L_KD",
        "model": {"use_prompts": False, "use_adapter": False},
    },
    "roads-1": {
        "description": "Domain adapter with L_CS, no class prompts",
        "model": {"use_prompts": False, "use_adapter": True},
    },
    "roads-2": {
        "description": "Class prompts with L_CE, no domain adapter",
        "model": {"use_prompts": True, "use_adapter": False},
    },
    "roads-3": {
        "description": "Full model",
        "model": {"use_prompts": True, "use_adapter": True},
    },

    # Loss weights
    "roads-4": {
        "description": "Full model, mu=0.025 delta=0.025 eta=0.95",
        "model": {"use_prompts": True, "use_adapter": True},
        "train": {"loss_weights": {"cs": 0.025, "ce": 0.025, "kd": 0.95}},
    },
    "roads-5": {
        "description": "Full model, mu=0.04 delta=0.01 eta=0.95",
        "model": {"use_prompts": True, "use_adapter": True},
        "train": {"loss_weights": {"cs": 0.04, "ce": 0.01, "kd": 0.95}},
    },
    "roads-6": {
        "description": "Full model, mu=0.01 delta=0.04 eta=0.95",
        "model": {"use_prompts": True, "use_adapter": True},
        "train": {"loss_weights": {"cs": 0.01, "ce": 0.04, "kd": 0.95}},
    },
    "roads-7": {
        "description": "Full model, mu=0.05 delta=0.05 eta=0.9",
        "model": {"use_prompts": True, "use_adapter": True},
        "train": {"loss_weights": {"cs": 0.05, "ce": 0.05, "kd": 0.9}},
    },
}

# Presets compared against each other in the component ablation table
COMPONENT_PRESETS = ["roads-0", "roads-1", "roads-2", "roads-3"]


def get_preset(name):
    """
    Get the override dictionary for an ablation preset.

    Args:
        name (str): Preset name, e.g. "roads-3"

    Returns:
        dict: Config overrides (without the description)
    """
    preset = ABLATION_PRESETS.get(name)
    if preset is None:
        return None
    return {key: value for key, value in preset.items() if key != "description"}


def get_preset_names():
    """
    Get all preset names in table order.

    Returns:
        list: Preset names
    """
    return list(ABLATION_PRESETS.keys())
