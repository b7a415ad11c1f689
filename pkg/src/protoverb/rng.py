"""Pinned, platform-independent randomness.

Every stochastic choice in this package (episode sampling, label
corruption, weight initialization) flows through :class:`DeterministicRng`
so that a given integer seed reproduces byte-identical results on any
machine and any supported numpy version.

The raw entropy source is numpy's Philox4x64 bit generator, a keyed
counter-based design whose output stream is fixed by construction.  Only
the raw 64-bit words are consumed; the derived quantities are produced by
the small, explicitly specified algorithms below rather than by numpy
``Generator`` methods (whose streams are not guaranteed stable across
numpy versions):

- ``randbelow(n)``: draw 64-bit words in stream order, reject any word
  >= 2**64 - 2**64 % n, return ``word % n``.
- ``uniform()``: take the top 53 bits of one word, scale by 2**-53, giving
  a float64 in [0, 1).
- ``uniforms(shape)``: one word per element, filled in C (row-major) order.
- ``choose(n, k)``: partial Fisher-Yates over [0, n) using ``randbelow``,
  consuming exactly k bounded draws (plus rejections); result sorted.
"""

import numpy as np

_WORD_MAX = 2**64


class DeterministicRng:
    """Seedable stream of reproducible ints and floats."""

    def __init__(self, seed):
        self._bitgen = np.random.Philox(key=int(seed) & (2**256 - 1))

    def words(self, count):
        """Next `count` raw 64-bit words, as a uint64 array."""
        if count < 0:
            raise ValueError("count must be >= 0")
        if count == 0:
            return np.empty(0, dtype=np.uint64)
        return self._bitgen.random_raw(count)

    def next_word(self):
        """Next raw 64-bit word from the Philox stream."""
        return int(self._bitgen.random_raw(1)[0])

    def randbelow(self, n):
        """Uniform integer in [0, n) by rejection sampling on raw words."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        limit = _WORD_MAX - _WORD_MAX % n
        while True:
            word = self.next_word()
            if word < limit:
                return word % n

    def uniform(self):
        """Uniform float64 in [0, 1) from the top 53 bits of one word."""
        return (self.next_word() >> 11) * 2.0**-53

    def uniforms(self, shape, low=0.0, high=1.0):
        """Array of uniforms in [low, high), filled in C (row-major) order."""
        count = int(np.prod(shape)) if shape else 1
        raw = self.words(count)
        unit = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * unit).reshape(shape)

    def normals(self, shape):
        """Standard normals via Box-Muller on consecutive uniform pairs.

        Consumes 2*ceil(count/2) words; pairs (u1, u2) map to
        sqrt(-2 ln(1-u1)) * (cos, sin)(2 pi u2), filled row-major.
        """
        count = int(np.prod(shape)) if shape else 1
        n_pairs = (count + 1) // 2
        u = self.uniforms((2 * n_pairs,))
        u1 = 1.0 - u[0::2]  # (0, 1]: keeps the log finite
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * n_pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count].reshape(shape)

    def choose(self, n, k):
        """k distinct indices from [0, n), without replacement.

        Partial Fisher-Yates; positions are returned in ascending order so
        callers get a canonical set representation.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot choose {k} from {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
