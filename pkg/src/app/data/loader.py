from collections import OrderedDict
from pathlib import Path
from typing import Sequence

import numpy as np

from src.app.data.images import decode_and_resize
from src.app.data.index import DatasetIndex, ExampleRef, ModalityKind

# 84x84x3 float32 images are ~83 KB each, so the default holds ~340 MB
DEFAULT_CACHE_SIZE = 4096


class ExampleLoader:
    """
    Turns example references into a float32 batch. Decoded images are kept
    in a least-recently-used cache of at most ``cache_size`` entries.
    """

    def __init__(self, index: DatasetIndex, cache_size: int = DEFAULT_CACHE_SIZE):
        if cache_size < 0:
            raise ValueError(f"cache_size must be >= 0, got {cache_size}")
        self.index = index
        self.cache_size = cache_size
        self._cache: OrderedDict[Path, np.ndarray] = OrderedDict()

    def load(self, refs: Sequence[ExampleRef]) -> np.ndarray:
        if self.index.modality.kind is ModalityKind.vectors:
            return self.index.vectors[np.asarray(refs, dtype=np.intp)].astype(np.float32)

        return np.stack([self._image(Path(ref)) for ref in refs])

    def _image(self, path: Path) -> np.ndarray:
        if path in self._cache:
            self._cache.move_to_end(path)
            return self._cache[path]

        height, width, _ = self.index.modality.shape
        image = decode_and_resize(path, size=(height, width))
        if self.cache_size:
            self._cache[path] = image
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return image

    @property
    def cached(self) -> int:
        return len(self._cache)
