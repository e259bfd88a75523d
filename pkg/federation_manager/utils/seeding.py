import hashlib
from typing import Union

import numpy as np

SEED_MASK = 2 ** 63 - 1


def derive_seed(base_seed: int, *labels: Union[int, str]) -> int:
    """
    Derive a child seed from a base seed and labels (round number, client id...).

    Uses BLAKE2b so the value is the same in every process, unlike hash().
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(base_seed)).encode("utf-8"))
    for label in labels:
        digest.update(b"\x1f")
        digest.update(str(label).encode("utf-8"))
    return int.from_bytes(digest.digest(), "big") & SEED_MASK


def make_rng(base_seed: int, *labels: Union[int, str]) -> np.random.Generator:
    """Seeded numpy generator for (base_seed, labels)."""
    return np.random.default_rng(derive_seed(base_seed, *labels))
