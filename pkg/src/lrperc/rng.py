"""Keyed, counter-based random streams.

Every random draw in the sampler is a pure function of (master seed, replica
index, substream tags, counter): a splitmix64 chain mixes the seed and tags
into a 64-bit stream key, and the value at counter t is the splitmix64
finalizer applied to key + (t+1)*GOLDEN. Streams are therefore stateless,
splittable, and vectorize over replicas and counters alike: the same
(seed, replica) always produces the same configuration no matter how replicas
are scheduled across workers, and distinct substreams never share state.

keyed_generator wraps a stream key into a numpy Philox Generator for the rare
places that want a stateful Generator interface.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

__all__ = [
    "GOLDEN",
    "derive_key",
    "keyed_generator",
    "stream_key",
    "stream_keys",
    "counter_values",
    "counter_uniforms",
]

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 output finalizer (scalar)."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _splitmix64(state: int) -> int:
    return _mix64((state + GOLDEN) & _MASK64)


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 output finalizer, vectorized over uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, *tags: int) -> int:
    """Mix a master seed and integer tags into a 64-bit stream key."""
    h = seed & _MASK64
    for tag in tags:
        h = _splitmix64(h ^ (tag & _MASK64))
    return h


def stream_keys(keys: np.ndarray, tag) -> np.ndarray:
    """Extend an array of stream keys by one tag level (vectorized chain step)."""
    keys = np.asarray(keys, dtype=np.uint64)
    tag = np.asarray(tag, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64((keys ^ tag) + np.uint64(GOLDEN))


def counter_values(key, counters) -> np.ndarray:
    """uint64 stream values at the given counters (counter 0 is the first draw)."""
    key = np.asarray(key, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(key + (c + np.uint64(1)) * np.uint64(GOLDEN))


def counter_uniforms(key, counters) -> np.ndarray:
    """Uniform(0,1) doubles (53-bit mantissa) at the given counters."""
    return (counter_values(key, counters) >> np.uint64(11)) * 2.0**-53


def derive_key(seed: int, *tags: int) -> tuple[int, int]:
    """Expand (seed, tags) into a 128-bit Philox key."""
    h = stream_key(seed, *tags)
    k0 = _splitmix64(h)
    k1 = _splitmix64(k0)
    return k0, k1


def keyed_generator(seed: int, *tags: int) -> Generator:
    """A fresh stateful Generator on the stream identified by (seed, *tags)."""
    k0, k1 = derive_key(seed, *tags)
    return Generator(Philox(key=np.array([k0, k1], dtype=np.uint64)))
