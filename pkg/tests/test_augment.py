import numpy as np
import pytest

from data.augment import AUGMENT_OPS, augment_ood, color_jitter, posterize, solarize


@pytest.fixture
def image():
    rng = np.random.default_rng(0)
    return (rng.integers(0, 256, size=(16, 16, 3)) / 255.0).astype(np.float32)


def test_augment_is_deterministic(image):
    np.testing.assert_array_equal(augment_ood(image, 5), augment_ood(image, 5))
    np.testing.assert_array_equal(augment_ood(image, [1, 2, 3]), augment_ood(image, [1, 2, 3]))


def test_augment_output_contract(image):
    out = augment_ood(image, 3)
    assert out.shape == image.shape
    assert out.dtype == np.float32
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_augment_varies_with_seed(image):
    views = [augment_ood(image, seed) for seed in range(8)]
    assert any(not np.array_equal(views[0], v) for v in views[1:])


def test_unknown_op(image):
    with pytest.raises(ValueError):
        augment_ood(image, 0, ops=["blur"])


def test_posterize():
    values = np.array([[[0.0, 128 / 255, 1.0]]])
    np.testing.assert_array_equal(posterize(values, 8), values)
    np.testing.assert_allclose(posterize(values, 1), [[[0.0, 128 / 255, 128 / 255]]])
    with pytest.raises(ValueError):
        posterize(values, 0)


def test_solarize_threshold_is_strict():
    values = np.array([[[51, 128, 204]]]) / 255.0
    np.testing.assert_allclose(solarize(values, 128 / 255), np.array([[[51, 128, 51]]]) / 255.0)
    np.testing.assert_array_equal(solarize(values, 1.0), values)


def test_point_ops_accept_grayscale():
    gray = np.linspace(0.0, 1.0, 16).reshape(4, 4)
    assert posterize(gray, 3).shape == (4, 4)
    assert solarize(gray, 0.5).max() <= 0.5 + 1e-9


def test_color_jitter_identity(image):
    np.testing.assert_allclose(color_jitter(image, 1.0, 0.0), image, atol=1e-6)


def test_color_jitter_keeps_value_channel(image):
    # hue/saturation changes never alter max(R, G, B)
    out = color_jitter(image, 0.4, 0.1)
    np.testing.assert_allclose(out.max(axis=-1), image.max(axis=-1), atol=1e-6)


def test_every_op_is_available(image):
    for op in AUGMENT_OPS:
        out = augment_ood(image, 1, ops=[op])
        assert out.shape == image.shape
