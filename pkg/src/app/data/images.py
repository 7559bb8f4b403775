import logging
import os
from pathlib import Path

import numpy as np
from PIL import Image

from src.app.core.errors import DatasetError
from src.app.data.index import DatasetIndex, Modality, ModalityKind

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
DEFAULT_IMAGE_SIZE = (84, 84)


def index_image_folder(root_path: str | os.PathLike, size: tuple[int, int] = DEFAULT_IMAGE_SIZE) -> DatasetIndex:
    """Index root/<class>/<file>.{png,jpg,jpeg}; classes and files are taken in sorted order."""
    root = Path(root_path)
    if not root.is_dir():
        raise DatasetError(f"dataset root not found: {root}")

    classes: dict[str, list[Path]] = {}
    for class_dir in sorted(path for path in root.iterdir() if path.is_dir()):
        files = sorted(
            (path for path in class_dir.iterdir() if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES),
            key=lambda path: path.name,
        )
        if not files:
            raise DatasetError(f"empty class: {class_dir}")
        for path in files:
            _check_readable(path)
        classes[class_dir.name] = files

    if not classes:
        raise DatasetError(f"no class directories under {root}")

    index = DatasetIndex(classes=classes, modality=Modality(ModalityKind.images, (*size, 3)))
    logger.info(f"Indexed {index.total} images in {len(classes)} classes under {root}")
    return index


def _check_readable(path: Path) -> None:
    try:
        with Image.open(path) as image:
            image.verify()
    except (OSError, SyntaxError) as e:
        raise DatasetError(f"unreadable image file: {path} ({e})") from e


def bilinear_resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centres and edge clamping (H x W x C, float)."""
    row_lo, row_hi, row_frac = _sample_positions(image.shape[0], height)
    col_lo, col_hi, col_frac = _sample_positions(image.shape[1], width)

    row_frac = row_frac[:, None, None]
    rows = image[row_lo] * (1 - row_frac) + image[row_hi] * row_frac

    col_frac = col_frac[None, :, None]
    return rows[:, col_lo] * (1 - col_frac) + rows[:, col_hi] * col_frac


def _sample_positions(in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    source = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    source = np.clip(source, 0, in_size - 1)
    lo = np.floor(source).astype(np.intp)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, source - lo


def decode_and_resize(path: str | os.PathLike, size: tuple[int, int] = DEFAULT_IMAGE_SIZE) -> np.ndarray:
    """Decode PNG/JPEG to an H x W x 3 float32 array in [0, 1]; grayscale is replicated."""
    try:
        with Image.open(path) as image:
            image.load()
            if image.mode == "I" or image.mode.startswith("I;16"):
                wide = np.asarray(image, dtype=np.float64) * (255.0 / 65535.0)
                pixels = np.clip(wide, 0.0, 255.0)[:, :, None].repeat(3, axis=2)
            elif image.mode in ("L", "LA", "F", "1"):
                pixels = np.asarray(image.convert("L"), dtype=np.float64)[:, :, None].repeat(3, axis=2)
            else:
                pixels = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (OSError, SyntaxError, ValueError) as e:
        raise DatasetError(f"corrupt image file: {path} ({e})") from e

    height, width = size
    if pixels.shape[:2] != (height, width):
        pixels = bilinear_resize(pixels, height, width)
    return (pixels / 255.0).astype(np.float32)
