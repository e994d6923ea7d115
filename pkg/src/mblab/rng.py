"""Seeded random streams.

All randomness goes through numpy's counter-based Philox4x64 bit generator.
A stream is identified by a master seed plus a tuple of labels; labels are
folded into the ``spawn_key`` of a :class:`numpy.random.SeedSequence`, so
streams with different labels are statistically independent and the mapping
does not depend on creation order.

Replication seeds use :func:`mix`::

    mix(master, i) = SeedSequence(entropy=master, spawn_key=(i,)).generate_state(1, uint64)[0]
"""
from __future__ import annotations

import zlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def seed_sequence(master_seed: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(_label_key(x) for x in labels)
    )


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Independent Philox generator for ``(master_seed, *labels)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, *labels)))


def mix(master_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for replication ``index``."""
    state = seed_sequence(master_seed, int(index)).generate_state(1, np.uint64)
    return int(state[0])


class UniformBuffer:
    """Block-drawn uniforms from one stream; avoids per-sample generator calls."""

    def __init__(self, gen: np.random.Generator, block: int = 4096):
        self._gen = gen
        self._block = block
        self._buf = gen.random(block)
        self._pos = 0

    def next(self) -> float:
        if self._pos == self._block:
            self._buf = self._gen.random(self._block)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)
