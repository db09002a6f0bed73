"""Keyed random streams.

Every random quantity in the lab is drawn from a stream identified by a tuple
of non-negative integers ``(seed, purpose, i, j, ...)``.  The tuple is mixed by
:class:`numpy.random.SeedSequence` (its ``spawn_key`` hashing), and the stream
itself is a counter-based :class:`numpy.random.Philox` generator.  Streams for
different keys are independent, and a stream never depends on which other
streams were drawn before it, so work can be split across processes in any
order without changing a single number.
"""

from __future__ import annotations

import numpy as np

# purpose words; the numeric values are part of the reproducibility contract
FIELD_A = 1
FIELD_C = 2
FIELD_SHIFT = 3
QUENCHED_PATH = 10
LIMIT_PATH = 11
WIENER = 12
BOOTSTRAP = 20
FIELD_SEED = 30
MISC = 99

_MASK64 = (1 << 64) - 1


def _words(key) -> tuple[int, ...]:
    return tuple(int(k) & _MASK64 for k in key)


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=_words(key))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream keyed by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def philox_key(seed: int, *key: int) -> np.ndarray:
    """128-bit Philox key derived from ``(seed, *key)``."""
    return seed_sequence(seed, *key).generate_state(2, np.uint64)


def counter_stream(key: np.ndarray, index: int) -> np.ndarray:
    """Sub-stream ``index`` of a keyed Philox stream.

    The index is written into the third counter word, so distinct indices use
    disjoint counter ranges (each sub-stream may draw up to 2**128 blocks).
    Building one costs far less than a fresh :class:`SeedSequence`.
    """
    counter = np.array([0, 0, int(index) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_uniforms(key: np.ndarray, block: int, size: int) -> np.ndarray:
    """Uniforms on [0, 1) for one block of a lazily extended cell sequence."""
    return counter_stream(key, block).random(size)


def derive_seed(seed: int, *key: int) -> int:
    """A fresh 64-bit seed (e.g. one field realization) from a keyed stream."""
    return int(seed_sequence(seed, *key).generate_state(1, np.uint64)[0])
