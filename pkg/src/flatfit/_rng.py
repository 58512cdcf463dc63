"""Splittable, counter-based random streams.

A :class:`Stream` is an immutable key.  ``stream.child("tree", 3)`` derives a
new, statistically independent key without consuming anything from the
parent, so the numbers a computation sees depend only on *where* it sits in
the computation and never on evaluation order.  Generators are Philox
(counter based) seeded through :class:`numpy.random.SeedSequence`.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


def _word(key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        key = int(key)
        if key < 0:
            # keep negative ints distinct from small positives
            return (1 << 40) + (-key)
        return key
    if isinstance(key, str):
        return (1 << 41) + zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"stream keys must be int or str, got {type(key).__name__}")


@dataclass(frozen=True)
class Stream:
    seed: int
    key: tuple = ()

    def child(self, *keys) -> "Stream":
        return Stream(self.seed, self.key + tuple(_word(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng) -> Stream:
    """Accept a Stream, an int seed, or None (seed 0)."""
    if isinstance(rng, Stream):
        return rng
    if rng is None:
        return Stream(0)
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    raise TypeError("rng must be a Stream or an integer seed")
