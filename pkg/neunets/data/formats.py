"""On-disk dataset layouts

Image datasets are directories with `meta.json`, `images.bin` and `labels.bin`, optionally with
a `test/` subdirectory in the same layout, or a CSV `path,label` listing `.npy` image arrays.
Text datasets are UTF-8 CSV files with a `label,text` header.
"""
import csv
import json
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from neunets.data.datasets import DatasetError, RawImages, RawText

logger = logging.getLogger(__name__)

IMAGE_MAGIC = b"NNSD"
IMAGE_HEADER = struct.Struct("<4sIHHH")

PathLike = Union[str, Path]


def write_image_dataset(directory: PathLike, raw: RawImages) -> None:
    raw.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, h, w, c = raw.images.shape
    (directory / "meta.json").write_text(json.dumps({"classes": raw.classes, "height": h, "width": w, "channels": c}))
    with open(directory / "images.bin", "wb") as f:
        f.write(IMAGE_HEADER.pack(IMAGE_MAGIC, n, h, w, c))
        f.write(np.ascontiguousarray(raw.images, dtype=np.uint8).tobytes())
    (directory / "labels.bin").write_bytes(np.asarray(raw.labels, dtype="<u4").tobytes())


def read_image_dataset(directory: PathLike) -> RawImages:
    """
    :raises DatasetError: on a missing file or a corrupt record
    """
    directory = Path(directory)
    try:
        meta = json.loads((directory / "meta.json").read_text())
        blob = (directory / "images.bin").read_bytes()
        labels = np.frombuffer((directory / "labels.bin").read_bytes(), dtype="<u4").astype(np.int64)
    except (OSError, ValueError) as e:
        raise DatasetError(f"Cannot read image dataset {directory}: {e}") from e
    if len(blob) < IMAGE_HEADER.size:
        raise DatasetError(f"{directory}/images.bin is truncated")
    magic, n, h, w, c = IMAGE_HEADER.unpack_from(blob)
    if magic != IMAGE_MAGIC:
        raise DatasetError(f"{directory}/images.bin is not an image dataset (magic {magic!r})")
    if (h, w, c) != (meta.get("height"), meta.get("width"), meta.get("channels")):
        raise DatasetError(f"{directory}: meta.json dims disagree with images.bin ({h}, {w}, {c})")
    if len(blob) - IMAGE_HEADER.size != n * h * w * c:
        raise DatasetError(f"{directory}/images.bin holds {len(blob) - IMAGE_HEADER.size} bytes for {n} images")
    if len(labels) != n:
        raise DatasetError(f"{directory}: {n} images but {len(labels)} labels")
    images = np.frombuffer(blob, dtype=np.uint8, offset=IMAGE_HEADER.size).reshape(n, h, w, c)
    raw = RawImages(images=images.copy(), labels=labels, classes=list(meta["classes"]))
    raw.validate()
    return raw


def _class_index(names: list[str]) -> list[str]:
    return sorted(set(names))


def read_image_csv(path: PathLike) -> RawImages:
    path = Path(path)
    rows = _read_csv(path, ("path", "label"))
    classes = _class_index([row["label"] for row in rows])
    images = []
    for row in rows:
        image_path = path.parent / row["path"]
        try:
            image = np.load(image_path)
        except (OSError, ValueError) as e:
            raise DatasetError(f"Cannot decode {image_path}: {e}") from e
        if image.ndim == 2:
            image = image[..., None]
        images.append(image.astype(np.uint8))
    if len({image.shape for image in images}) > 1:
        raise DatasetError(f"{path} lists images of different shapes")
    labels = np.array([classes.index(row["label"]) for row in rows], dtype=np.int64)
    return RawImages(images=np.stack(images), labels=labels, classes=classes)


def read_text_csv(path: PathLike, classes: Optional[list[str]] = None) -> RawText:
    rows = _read_csv(Path(path), ("label", "text"))
    classes = classes or _class_index([row["label"] for row in rows])
    unknown = {row["label"] for row in rows} - set(classes)
    if unknown:
        raise DatasetError(f"{path} has labels outside the known classes: {sorted(unknown)}")
    return RawText(
        texts=[row["text"] for row in rows],
        labels=np.array([classes.index(row["label"]) for row in rows], dtype=np.int64),
        classes=list(classes),
    )


def write_text_csv(path: PathLike, raw: RawText) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "text"])
        for label, text in zip(raw.labels, raw.texts):
            writer.writerow([raw.classes[label], text])


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict[str, str]]:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or not set(columns) <= set(reader.fieldnames):
                raise DatasetError(f"{path} needs the columns {', '.join(columns)}")
            rows = list(reader)
    except (OSError, UnicodeDecodeError) as e:
        raise DatasetError(f"Cannot read {path}: {e}") from e
    if not rows:
        raise DatasetError(f"{path} holds no records")
    return rows


def detect_domain(path: PathLike) -> str:
    path = Path(path)
    if path.is_dir():
        return "image"
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    return "image" if "path" in header else "text"


def load_raw(path: PathLike) -> tuple[Union[RawImages, RawText], Optional[Union[RawImages, RawText]]]:
    """Training records and, for image directories with a `test/` subdirectory, test records"""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"No dataset at {path}")
    if path.is_dir():
        test_dir = path / "test"
        return read_image_dataset(path), read_image_dataset(test_dir) if test_dir.is_dir() else None
    if detect_domain(path) == "image":
        return read_image_csv(path), None
    return read_text_csv(path), None
