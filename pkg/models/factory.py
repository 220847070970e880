"""
Encoder factory: resolves registry names from config/models.py to Encoder
instances.
"""
import importlib
import logging

from config.models import get_encoder_entry, get_encoder_names
from models.backbone import Encoder
from utils.exceptions import ConfigError

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger('EncoderFactory')


def get_encoder_class(name):
    """
    Get the Encoder subclass registered under a name.

    Args:
        name (str): Registry name

    Returns:
        type: Encoder subclass
    """
    entry = get_encoder_entry(name)
    if not entry:
        raise ConfigError(f"Unknown encoder '{name}'. Registered: {get_encoder_names()}")

    try:
        module = importlib.import_module(entry["module"])
        encoder_class = getattr(module, entry["class"])
    except (ImportError, AttributeError) as e:
        raise ConfigError(f"Encoder '{name}' could not be loaded: {str(e)}") from e

    if not issubclass(encoder_class, Encoder):
        raise ConfigError(f"{entry['class']} does not implement the Encoder interface")
    return encoder_class


def build_encoder(name, channels=None, input_size=32, pretrained=False):
    """
    Instantiate an encoder from its registry name.

    Args:
        name (str): Registry name
        channels (list, optional): Channels per level (ignored by fixed backbones)
        input_size (int): Square input size
        pretrained (bool): Load external pretrained weights where supported

    Returns:
        Encoder: New encoder instance
    """
    encoder_class = get_encoder_class(name)
    kwargs = {"input_size": input_size, "pretrained": pretrained}
    if channels is not None:
        kwargs["channels"] = tuple(channels)
    encoder = encoder_class(**kwargs)
    logger.info(f"Built encoder '{name}' with channels {list(encoder.channels)}")
    return encoder
