import numpy as np

MAX_SHIFT = 4
FLIP_PROBABILITY = 0.5


def flip_horizontal(image: np.ndarray) -> np.ndarray:
    return image[:, ::-1]


def shift_horizontal(image: np.ndarray, offset: int) -> np.ndarray:
    """Move an [h, w, c] image `offset` pixels to the right; vacated columns are zero"""
    out = np.zeros_like(image)
    if offset > 0:
        out[:, offset:] = image[:, :-offset]
    elif offset < 0:
        out[:, :offset] = image[:, -offset:]
    else:
        out[:] = image
    return out


def augment(
    batch: np.ndarray,
    rng: np.random.Generator,
    flip_probability: float = FLIP_PROBABILITY,
    max_shift: int = MAX_SHIFT,
) -> np.ndarray:
    """Independent random horizontal flip and left/right shift of every image in [n, h, w, c]"""
    out = np.empty_like(batch)
    flips = rng.random(len(batch)) < flip_probability
    offsets = rng.integers(-max_shift, max_shift + 1, size=len(batch))
    for i, image in enumerate(batch):
        if flips[i]:
            image = flip_horizontal(image)
        out[i] = shift_horizontal(image, int(offsets[i]))
    return out
