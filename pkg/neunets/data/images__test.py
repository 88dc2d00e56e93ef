import numpy as np
import pytest

from neunets.data.datasets import DatasetError, RawImages, split_holdout
from neunets.data.images import prepare_images, preprocess_images, resize_images, resolution_for


def raw_images(n=60, size=28, channels=1, n_classes=3, seed=0):
    rng = np.random.default_rng(seed)
    return RawImages(
        images=rng.integers(0, 256, size=(n, size, size, channels)).astype(np.uint8),
        labels=np.arange(n) % n_classes,
        classes=[str(i) for i in range(n_classes)],
    )


def test_resolutions():
    assert resolution_for("ncevolve") == 64
    assert resolution_for("tapas") == 32
    assert resolution_for("ncevolve", override=16) == 16
    with pytest.raises(DatasetError):
        resolution_for("random")


def test_upscales_small_images():
    dataset = preprocess_images(raw_images(), resolution_for("ncevolve"))
    assert dataset.input_shape == (64, 64, 1)
    assert dataset.meta().input_shape == (64, 64, 1)
    assert not dataset.meta().nonnegative_inputs


def test_resize_is_idempotent_at_target():
    images = raw_images(n=4, size=16).images
    once = resize_images(images, 16)
    np.testing.assert_array_equal(once, images.astype(np.float64))
    np.testing.assert_array_equal(resize_images(once, 16), once)


def test_constant_images_standardize_to_zero():
    raw = raw_images(n=20)
    raw.images[:] = 77
    dataset = preprocess_images(raw, 28)
    assert np.all(dataset.train.x == 0)
    assert np.all(dataset.holdout.x == 0)


def test_standardized_training_split():
    dataset = preprocess_images(raw_images(n=200, size=8, channels=3), 8)
    x = dataset.train.x.astype(np.float64)
    assert np.abs(x.mean(axis=0)).max() <= 1e-6
    assert np.abs(x.std(axis=0) - 1).max() <= 1e-3


def test_deterministic():
    first, second = preprocess_images(raw_images(), 16, seed=3), preprocess_images(raw_images(), 16, seed=3)
    np.testing.assert_array_equal(first.train.x, second.train.x)
    np.testing.assert_array_equal(first.holdout.y, second.holdout.y)


def test_holdout_is_stratified_tenth():
    x, y = np.zeros((100, 2)), np.repeat(np.arange(4), 25)
    train, holdout = split_holdout(x, y, seed=0)
    assert len(holdout) == 10 and len(train) == 90
    assert set(np.bincount(holdout.y)) <= {2, 3}


def test_test_split_uses_training_statistics():
    dataset = preprocess_images(raw_images(), 8, raw_test=raw_images(n=9, seed=5))
    assert dataset.test.x.shape == (9, 8, 8, 1)
    np.testing.assert_allclose(prepare_images(raw_images(n=9, seed=5).images, dataset), dataset.test.x)


def test_labels_out_of_range():
    raw = raw_images()
    raw.labels[0] = 3
    with pytest.raises(DatasetError):
        preprocess_images(raw, 8)
