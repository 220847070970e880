import json

import pytest

from config.corruptions import CORRUPTION_KINDS, get_severity_params
from config.defaults import DEFAULT_CONFIG, get_default_config
from config.models import get_encoder_entry, get_encoder_names
from config.presets import COMPONENT_PRESETS, get_preset, get_preset_names
from utils.config_loader import merge_config, parse_override, resolve_config, write_resolved_config
from utils.exceptions import ConfigError


def test_default_config_is_a_fresh_copy():
    config = get_default_config()
    config["train"]["loss_weights"]["kd"] = 0.0
    assert DEFAULT_CONFIG["train"]["loss_weights"]["kd"] == 0.95


def test_default_loss_weights():
    assert get_default_config()["train"]["loss_weights"] == {"kd": 0.95, "ce": 0.025, "cs": 0.025}


@pytest.mark.parametrize(
    "preset, prompts, adapter",
    [("roads-0", False, False), ("roads-1", False, True), ("roads-2", True, False), ("roads-3", True, True)],
)
def test_component_presets(preset, prompts, adapter):
    config = resolve_config(preset=preset)
    assert config["model"]["use_prompts"] is prompts
    assert config["model"]["use_adapter"] is adapter
    assert config["preset"] == preset


def test_loss_weight_presets():
    assert get_preset("roads-5")["train"]["loss_weights"] == {"cs": 0.04, "ce": 0.01, "kd": 0.95}
    assert get_preset("roads-7")["train"]["loss_weights"] == {"cs": 0.05, "ce": 0.05, "kd": 0.9}
    assert COMPONENT_PRESETS == ["roads-0", "roads-1", "roads-2", "roads-3"]
    assert len(get_preset_names()) == 8
    assert get_preset("roads-99") is None


def test_unknown_key_names_the_dotted_path():
    with pytest.raises(ConfigError, match="train.bogus"):
        merge_config(get_default_config(), {"train": {"bogus": 1}})


def test_section_cannot_be_replaced_by_a_scalar():
    with pytest.raises(ConfigError, match="model"):
        merge_config(get_default_config(), {"model": 3})


def test_parse_override_values():
    assert parse_override("train.epochs=5") == {"train": {"epochs": 5}}
    assert parse_override("model.use_prompts=false") == {"model": {"use_prompts": False}}
    assert parse_override("model.encoder=toy_resnet") == {"model": {"encoder": "toy_resnet"}}
    assert parse_override("model.encoder_channels=[4, 8]") == {"model": {"encoder_channels": [4, 8]}}
    with pytest.raises(ConfigError):
        parse_override("train.epochs")


def test_flags_override_file_and_preset(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "roads-2", "train": {"epochs": 4, "lr": 0.01}}))
    config = resolve_config(str(path), overrides=["train.epochs=7"], flags={"seed": 5})
    assert config["model"]["use_prompts"] is True
    assert config["model"]["use_adapter"] is False
    assert config["train"]["epochs"] == 7
    assert config["train"]["lr"] == 0.01
    assert config["seed"] == 5


def test_conflicting_preset_and_override():
    with pytest.raises(ConfigError, match="roads-0"):
        resolve_config(preset="roads-0", overrides=["model.use_prompts=true"])


def test_unknown_preset():
    with pytest.raises(ConfigError, match="Unknown preset"):
        resolve_config(preset="roads-x")


def test_resolved_snapshot_reproduces_config(tmp_path):
    config = resolve_config(preset="roads-1", overrides=["train.epochs=2", "eval.sigma=2.0"])
    path = write_resolved_config(config, str(tmp_path))
    assert resolve_config(path) == config


def test_severity_tables():
    assert get_severity_params("brightness", 3) == 0.3
    assert get_severity_params("contrast", 3) == 0.2
    assert get_severity_params("defocus_blur", 3) == (6, 0.5)
    assert get_severity_params("gaussian_noise", 3) == 0.18
    assert sorted(CORRUPTION_KINDS) == ["brightness", "contrast", "defocus_blur", "gaussian_noise"]
    with pytest.raises(ValueError):
        get_severity_params("fog", 3)
    with pytest.raises(ValueError):
        get_severity_params("contrast", 6)


def test_encoder_registry():
    assert get_encoder_names() == ["toy_resnet", "wide_resnet50"]
    assert get_encoder_entry("toy_resnet")["class"] == "ToyResNetEncoder"
    assert get_encoder_entry("vit") is None
