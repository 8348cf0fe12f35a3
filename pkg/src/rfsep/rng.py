"""Deterministic counter-based random number generation.

The generator hashes a 64-bit counter with a 64-bit key through the
splitmix64 finalizer:

    raw(i) = mix64( key XOR mix64((i + 1) * GOLDEN) )

where ``mix64`` is the xor-shift-multiply finalizer and GOLDEN is the
64-bit golden-ratio constant. Because each output is a pure function of
(key, counter), streams are reproducible across platforms, trivially
splittable (derive a new key by hashing), and vectorize cleanly with
uint64 array arithmetic. All wraparound is the usual mod-2^64.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer: a bijective 64-bit avalanche hash (array in/out)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _hash1(x: int) -> int:
    """mix64 of a single value via array ops (numpy warns on scalar overflow)."""
    return int(mix64(np.array([x & _U64_MASK], dtype=np.uint64))[0])


def _tag_key(x: int) -> int:
    """Hash of (x + 1) * GOLDEN, used to absorb split tags and counters."""
    arr = (np.array([x & _U64_MASK], dtype=np.uint64) + np.uint64(1)) * _GOLDEN
    return int(mix64(arr)[0])


def fold(h: int, x: int) -> int:
    """Absorb one integer into a running 64-bit hash state."""
    return _hash1((h & _U64_MASK) ^ _tag_key(x))


class CounterRng:
    """Counter-based generator with explicit 64-bit seeding.

    The stream position is a plain integer counter; identical (seed, draw
    sequence) pairs always produce identical outputs, independent of
    platform and draw batching granularity for same-type draws.
    """

    def __init__(self, seed: int):
        self._key = np.uint64(_hash1(seed))
        self._counter = 0

    def derive(self, tag: int) -> "CounterRng":
        """Split off an independent generator keyed by (seed, tag)."""
        child = CounterRng.__new__(CounterRng)
        child._key = np.uint64(_hash1(int(self._key) ^ _tag_key(tag)))
        child._counter = 0
        return child

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 words."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return mix64(self._key ^ mix64(idx * _GOLDEN))

    def random(self, n: int) -> np.ndarray:
        """Uniform float64 in [0, 1) with 53-bit resolution."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.random(n)

    def bits(self, n: int) -> np.ndarray:
        """n bits in {0, 1} as uint8, one per raw word."""
        return (self.raw(n) >> np.uint64(63)).astype(np.uint8)

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        u1 = np.maximum(self.random(m), 2.0**-53)
        u2 = self.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal_complex(self, n: int) -> np.ndarray:
        """Circular complex normals with unit total variance."""
        z = self.normal(2 * n)
        return (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n) driven by this stream."""
        perm = np.arange(n)
        if n < 2:
            return perm
        words = self.raw(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(words[n - 1 - i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
