import logging
from typing import Optional

import numpy as np
from scipy import ndimage

from neunets.data.datasets import DatasetError, ImageDataset, RawImages, Split, Standardization, split_holdout

logger = logging.getLogger(__name__)

# input resolution each synthesizer trains at
RESOLUTIONS = {"ncevolve": 64, "tapas": 32, "hyperband": 32}


def resolution_for(algorithm: str, override: Optional[int] = None) -> int:
    if override is not None:
        return override
    try:
        return RESOLUTIONS[algorithm]
    except KeyError:
        raise DatasetError(f"No input resolution known for {algorithm!r}")


def resize_images(images: np.ndarray, resolution: int) -> np.ndarray:
    """Bilinear resize of [n, h, w, c] to [n, resolution, resolution, c] (float64)"""
    n, h, w, c = images.shape
    if (h, w) == (resolution, resolution):
        return images.astype(np.float64)
    factors = (resolution / h, resolution / w, 1)
    out = np.empty((n, resolution, resolution, c), dtype=np.float64)
    for i, image in enumerate(images.astype(np.float64)):
        out[i] = ndimage.zoom(image, factors, order=1, mode="nearest")
    return out


def preprocess_images(
    raw: RawImages,
    resolution: int,
    raw_test: Optional[RawImages] = None,
    holdout_fraction: float = 0.1,
    seed: int = 0,
) -> ImageDataset:
    """Resize, split off the holdout and standardize every pixel position with training statistics"""
    raw.validate()
    if len(raw.labels) == 0:
        raise DatasetError("Empty image dataset")
    logger.info(f"Preprocessing {len(raw.labels)} images {raw.images.shape[1:]} at {resolution}x{resolution}")
    resized = resize_images(raw.images, resolution)
    train, holdout = split_holdout(resized, raw.labels.astype(np.int64), holdout_fraction, seed)
    standardization = Standardization.fit(train.x)
    test = None
    if raw_test is not None:
        raw_test.validate()
        if raw_test.images.shape[-1] != raw.images.shape[-1]:
            raise DatasetError(f"Test images have {raw_test.images.shape[-1]} channels, training images {raw.images.shape[-1]}")
        test = Split(standardization.apply(resize_images(raw_test.images, resolution)), raw_test.labels.astype(np.int64))
    return ImageDataset(
        domain="image",
        classes=list(raw.classes),
        train=Split(standardization.apply(train.x), train.y),
        holdout=Split(standardization.apply(holdout.x), holdout.y),
        test=test,
        nonnegative=False,
        resolution=resolution,
        standardization=standardization,
    )


def prepare_images(images: np.ndarray, dataset: ImageDataset) -> np.ndarray:
    """Apply a dataset's resizing and standardization to new raw images"""
    if dataset.standardization is None:
        raise DatasetError("Dataset carries no standardization statistics")
    return dataset.standardization.apply(resize_images(images, dataset.resolution))
