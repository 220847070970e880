import pytest
import torch

from models.backbone import Bottleneck, FeatureMapSet, ToyResNetEncoder, compress
from models.factory import build_encoder, get_encoder_class
from utils.exceptions import ConfigError
from tests.helpers import module_gradcheck, snapshot


def test_toy_encoder_levels(encoder):
    features = encoder.encode(torch.rand(2, 3, 32, 32))
    assert isinstance(features, FeatureMapSet)
    assert features.source == "teacher"
    assert features.shapes() == [(8, 8, 8), (16, 4, 4), (32, 2, 2)]
    assert encoder.strides == (4, 8, 16)
    assert encoder.level_shapes() == features.shapes()


def test_encode_rejects_wrong_size(encoder):
    with pytest.raises(ValueError):
        encoder.encode(torch.rand(1, 3, 16, 16))


def test_freeze_fixes_everything(encoder):
    assert all(not p.requires_grad for p in encoder.parameters())
    assert not encoder.training
    before = snapshot(encoder)
    encoder(torch.rand(4, 3, 32, 32))
    after = snapshot(encoder)
    assert all(torch.equal(before[k], after[k]) for k in before)


def test_feature_map_set_contract():
    with pytest.raises(ValueError):
        FeatureMapSet([torch.zeros(1, 2, 2, 2)])
    with pytest.raises(ValueError):
        FeatureMapSet([torch.zeros(1, 2, 2, 2)] * 2, source="oracle")


def test_bottleneck_compresses_to_deepest_resolution(encoder):
    bottleneck = Bottleneck(encoder.channels, encoder.strides, 24)
    embedding = compress(bottleneck, encoder.encode(torch.rand(2, 3, 32, 32)))
    assert embedding.shape == (2, 24, 2, 2)
    with pytest.raises(ValueError):
        bottleneck([torch.zeros(2, 8, 8, 8), torch.zeros(2, 16, 4, 4)])


def test_manifest(encoder):
    assert encoder.manifest() == {"name": "toy_resnet", "channels": [8, 16, 32], "strides": [4, 8, 16],
                                  "input_size": 32}


def test_factory_builds_registered_encoders():
    encoder = build_encoder("toy_resnet", channels=[4, 8, 16], input_size=64)
    assert isinstance(encoder, ToyResNetEncoder)
    assert encoder.channels == (4, 8, 16)
    assert encoder.level_shapes() == [(4, 16, 16), (8, 8, 8), (16, 4, 4)]
    with pytest.raises(ConfigError):
        get_encoder_class("vit_huge")


def test_bottleneck_gradients():
    torch.manual_seed(0)
    bottleneck = Bottleneck((2, 3, 4), (4, 8, 16), 4).eval()

    class Levels(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.bottleneck = bottleneck

        def forward(self, fine, mid, deep):
            return self.bottleneck([fine, mid, deep])

    levels = (torch.randn(1, 2, 8, 8), torch.randn(1, 3, 4, 4), torch.randn(1, 4, 2, 2))
    assert module_gradcheck(Levels(), levels)


def test_doubling_input_doubles_embedding():
    torch.manual_seed(0)
    small = build_encoder("toy_resnet", channels=[8, 16, 32], input_size=32).freeze()
    large = build_encoder("toy_resnet", channels=[8, 16, 32], input_size=64).freeze()
    bottleneck = Bottleneck(small.channels, small.strides, 16).eval()
    a = compress(bottleneck, small.encode(torch.rand(1, 3, 32, 32)))
    b = compress(bottleneck, large.encode(torch.rand(1, 3, 64, 64)))
    assert a.shape[-2:] == (2, 2)
    assert b.shape[-2:] == (4, 4)


def test_zero_image_gives_finite_features(encoder):
    features = encoder.encode(torch.zeros(2, 3, 32, 32))
    assert all(torch.isfinite(level).all() for level in features)
    embedding = compress(Bottleneck(encoder.channels, encoder.strides, 16).eval(), features)
    assert torch.isfinite(embedding).all()
