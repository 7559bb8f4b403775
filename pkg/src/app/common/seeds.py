import hashlib

import numpy as np


def derive_seed(seed: int, *labels: str | int) -> int:
    """Derive a 64-bit sub-seed from the run seed and a fixed label path."""
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(seed)).encode("ascii"))
    for label in labels:
        digest.update(b"/")
        digest.update(str(label).encode("utf-8"))
    return int.from_bytes(digest.digest(), "little")


def derive_rng(seed: int, *labels: str | int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
