"""Counter-based random streams with deterministic splitting.

A :class:`RandomStream` is an immutable (seed, key) pair.  Children are
derived by appending labels to the key, and the generator behind a stream is
a Philox counter-based bit generator keyed through ``numpy.random.SeedSequence``.
Two streams with the same seed and key always produce the same draws, no
matter which process builds them or in what order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RandomStream", "label_to_int"]


def label_to_int(label: int | str) -> int:
    """Map a stream label to a non-negative 32-bit integer.

    Integers pass through (they must be non-negative); strings are hashed
    with blake2b so the mapping is stable across interpreter runs.
    """
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"stream labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RandomStream:
    """Immutable handle on a reproducible random stream.

    Parameters
    ----------
    seed : int
        Master seed.
    key : tuple of int
        Path of split labels below the master seed.
    """

    seed: int
    key: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def child(self, *labels: int | str) -> "RandomStream":
        return RandomStream(self.seed, self.key + tuple(label_to_int(lb) for lb in labels))

    def chunk(self, index: int) -> "RandomStream":
        """Stream owning replica chunk ``index``."""
        return self.child("chunk", index)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def describe(self) -> str:
        return f"{self.seed}:" + ".".join(str(k) for k in self.key)
