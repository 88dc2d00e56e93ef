import numpy as np

from neunets.data.augment import augment, flip_horizontal, shift_horizontal


def image():
    return np.arange(1, 6 * 8 * 2 + 1, dtype=np.float32).reshape(6, 8, 2)


def test_shift_loses_border_pixels():
    original = image()
    restored = shift_horizontal(shift_horizontal(original, 4), -4)
    assert not np.array_equal(restored, original)
    np.testing.assert_array_equal(restored[:, :4], original[:, :4])
    assert np.all(restored[:, 4:] == 0)


def test_shift_fills_with_zeros():
    shifted = shift_horizontal(image(), -3)
    np.testing.assert_array_equal(shifted[:, :5], image()[:, 3:])
    assert np.all(shifted[:, 5:] == 0)
    np.testing.assert_array_equal(shift_horizontal(image(), 0), image())


def test_flip_twice_is_identity():
    np.testing.assert_array_equal(flip_horizontal(flip_horizontal(image())), image())


def test_seeded_and_independent_per_sample():
    batch = np.stack([image()] * 16)
    first = augment(batch, np.random.default_rng(0))
    np.testing.assert_array_equal(first, augment(batch, np.random.default_rng(0)))
    assert len({sample.tobytes() for sample in first}) > 1
    assert first.shape == batch.shape


def test_disabled_augmentation_leaves_batch_unchanged():
    batch = np.stack([image()] * 4)
    np.testing.assert_array_equal(augment(batch, np.random.default_rng(0), flip_probability=0.0, max_shift=0), batch)
