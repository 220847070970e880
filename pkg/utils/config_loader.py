"""
Run configuration: defaults, then preset, then JSON file, then command-line
overrides. Only keys that exist in the defaults may be set.
"""

import copy
import json
import logging
import os

from config.defaults import get_default_config
from config.presets import get_preset, get_preset_names
from utils.exceptions import ConfigError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("ConfigLoader")

RESOLVED_CONFIG_FILE = "resolved_config.json"


def merge_config(base, overrides, prefix=""):
    """
    Recursively merge `overrides` into a copy of `base`.

    Args:
        base (dict): Current configuration
        overrides (dict): Values to apply
        prefix (str): Dotted path of `base`, for error messages

    Returns:
        dict: Merged configuration
    """
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        dotted = f"{prefix}{key}"
        if key not in merged:
            raise ConfigError(f"Unknown config key '{dotted}'")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Config key '{dotted}' is a section; got {type(value).__name__}")
            merged[key] = merge_config(merged[key], value, prefix=f"{dotted}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_value(text):
    """JSON literal if it parses, plain string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(assignment):
    """
    Turn "section.key=value" into a nested dict.

    Args:
        assignment (str): Dotted key and value

    Returns:
        dict: Nested override
    """
    if "=" not in assignment:
        raise ConfigError(f"Override '{assignment}' must look like section.key=value")
    dotted, text = assignment.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"Override '{assignment}' has an empty key")
    nested = parse_value(text.strip())
    for key in reversed(keys):
        nested = {key: nested}
    return nested


def load_config_file(path):
    if not os.path.isfile(path):
        raise ConfigError(f"Config file {path} does not exist")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {str(e)}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return data


def resolve_config(config_path=None, preset=None, overrides=None, flags=None):
    """
    Build the effective configuration.

    Order: defaults, preset (from the flag, else from the file), file, `--set`
    overrides, dedicated flags.

    Args:
        config_path (str, optional): JSON config file
        preset (str, optional): Preset name from the command line
        overrides (list, optional): "section.key=value" strings
        flags (dict, optional): Nested overrides from dedicated flags

    Returns:
        dict: Resolved configuration
    """
    file_config = load_config_file(config_path) if config_path else {}
    preset = preset or file_config.get("preset")
    config = get_default_config()

    if preset:
        preset_overrides = get_preset(preset)
        if preset_overrides is None:
            raise ConfigError(f"Unknown preset '{preset}'. Available: {get_preset_names()}")
        config = merge_config(config, preset_overrides)

    file_preset = file_config.get("preset")
    if file_preset and preset != file_preset:
        logger.info(f"Preset '{preset}' from the command line replaces '{file_preset}' from {config_path}")
    config = merge_config(config, {k: v for k, v in file_config.items() if k != "preset"})
    config["preset"] = preset

    for assignment in overrides or []:
        config = merge_config(config, parse_override(assignment))
    if flags:
        config = merge_config(config, flags)

    check_conflicts(config)
    return config


def check_conflicts(config):
    """Reject combinations of settings that contradict each other."""
    preset = config.get("preset")
    if preset:
        expected = get_preset(preset).get("model", {})
        for key, value in expected.items():
            if config["model"][key] != value:
                raise ConfigError(
                    f"Preset '{preset}' sets model.{key}={value} but the configuration overrides it to "
                    f"{config['model'][key]}"
                )


def write_resolved_config(config, out_dir):
    """
    Snapshot the configuration next to a run's outputs.

    Returns:
        str: Path of resolved_config.json
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, RESOLVED_CONFIG_FILE)
    with open(path, "w") as f:
        json.dump(config, f, indent=2)
    logger.info(f"Wrote resolved configuration to {path}")
    return path
