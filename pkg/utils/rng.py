from __future__ import annotations

import hashlib
from typing import Union

import numpy as np


SeedPart = Union[int, str]


def derive_seed(*parts: SeedPart) -> int:
    """Stable 63-bit seed from an ordered tuple of ints/strings."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def substream(*parts: SeedPart) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
