import numpy as np
import pytest
from PIL import Image

from config.corruptions import CORRUPTION_KINDS
from data.corruptions import CorruptionSpec, contrast, corrupt, corrupt_dataset, disk_kernel, gaussian_noise
from data.mvtec_loader import export_dataset, load_dataset
from data.toy_generator import ToySpec, generate_toy_dataset
from utils.exceptions import DataError


def _images(n=10, size=64):
    rng = np.random.default_rng(1234)
    images = []
    for _ in range(n):
        base = rng.integers(0, 256, size=(size // 8, size // 8, 3)).astype(np.uint8)
        image = np.asarray(Image.fromarray(base).resize((size, size), Image.BILINEAR))
        images.append(image)
    return images


def _reference():
    try:
        from imagecorruptions import corrupt as reference_corrupt
    except Exception as e:
        pytest.skip(f"imagecorruptions unavailable: {e}")
    return reference_corrupt


@pytest.mark.parametrize("kind", CORRUPTION_KINDS)
def test_corruption_is_deterministic_and_bounded(kind):
    image = _images(1)[0] / 255.0
    spec = CorruptionSpec(kind, 3, seed=9)
    a = corrupt(image, spec)
    b = corrupt(image, spec)
    np.testing.assert_array_equal(a, b)
    assert a.shape == image.shape
    assert a.dtype == np.float32
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_grayscale_input_keeps_its_shape():
    image = _images(1)[0].mean(axis=-1) / 255.0
    out = corrupt(image, CorruptionSpec("defocus_blur", 2))
    assert out.shape == image.shape


def test_noise_seed_changes_output():
    image = np.full((16, 16, 3), 0.5)
    a = corrupt(image, CorruptionSpec("gaussian_noise", 3, seed=1))
    b = corrupt(image, CorruptionSpec("gaussian_noise", 3, seed=2))
    assert not np.array_equal(a, b)
    spec = CorruptionSpec("gaussian_noise", 3, seed=1)
    assert spec.for_image("a/test/good/000.png") == spec.for_image("a/test/good/000")
    assert spec.for_image("a/test/good/000.png") != spec.for_image("a/test/good/001.png")
    assert spec.for_image("a/test/good/000.png").kind == "gaussian_noise"


def test_gaussian_noise_matches_global_seeding():
    image = np.zeros((8, 8, 3))
    np.random.seed(42)
    expected = np.random.normal(size=image.shape, scale=0.18)
    np.testing.assert_array_equal(gaussian_noise(image, 0.18, 42), expected)


def test_contrast_shrinks_towards_the_mean():
    image = _images(1)[0] / 255.0
    out = contrast(image, 0.2)
    np.testing.assert_allclose(out.mean(axis=(0, 1)), image.mean(axis=(0, 1)), atol=1e-12)
    np.testing.assert_allclose(out.std(axis=(0, 1)), 0.2 * image.std(axis=(0, 1)), rtol=1e-9)


def test_brightness_raises_value():
    image = _images(1)[0] / 255.0 * 0.5
    out = corrupt(image, CorruptionSpec("brightness", 3))
    assert out.mean() > image.mean()


def test_disk_kernel_sums_to_one():
    for radius, alias in [(3, 0.1), (6, 0.5), (10, 0.5)]:
        assert disk_kernel(radius, alias).sum() == pytest.approx(1.0, abs=1e-5)


def test_spec_validation():
    with pytest.raises(ValueError):
        CorruptionSpec("fog")
    with pytest.raises(ValueError):
        CorruptionSpec("contrast", severity=0)
    assert CorruptionSpec("contrast", 3).tag == "contrast_s3"


@pytest.mark.parametrize("kind", CORRUPTION_KINDS)
def test_matches_reference_implementation(kind):
    reference_corrupt = _reference()
    for i, image in enumerate(_images(10)):
        np.random.seed(i)
        expected = reference_corrupt(image, corruption_name=kind, severity=3).astype(np.float64)
        ours = corrupt(image / 255.0, CorruptionSpec(kind, 3, seed=i)) * 255.0
        assert np.abs(ours - expected).max() <= 1.0 + 1e-4


def test_corrupt_dataset_touches_test_images_only(tmp_path):
    index = generate_toy_dataset(ToySpec(n_classes=2, n_train=2, n_test_normal=1, n_test_anomalous=1, seed=3))
    source = tmp_path / "src"
    target = tmp_path / "dst"
    export_dataset(index, source)

    count = corrupt_dataset(source, target, CorruptionSpec("contrast", 3), max_workers=2)
    assert count == 4

    clean = load_dataset(source)
    shifted = load_dataset(target)
    for a, b in zip(clean.samples, shifted.samples):
        if a.split == "train":
            np.testing.assert_array_equal(a.load_image(), b.load_image())
        else:
            assert b.load_image().std() < a.load_image().std()
        np.testing.assert_array_equal(a.load_mask(), b.load_mask())

    with pytest.raises(DataError):
        corrupt_dataset(source, target, CorruptionSpec("contrast", 3))
