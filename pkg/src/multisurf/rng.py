"""Seeded draws built directly on the raw PCG64 stream.

Every random choice in the package (exemplar picks, stratified splits,
bootstrap resamples, per-node feature orders, SGD visiting orders) goes
through :class:`SeededDraws`. Only ``PCG64.random_raw`` is used, never
numpy's higher-level samplers, so a seed reproduces the same draws on any
platform and numpy release that ships PCG64.

Bounded integers use rejection sampling on 64-bit words: a word ``r`` is
accepted when ``r < 2**64 - (2**64 mod n)`` and mapped to ``r mod n``.
Permutations are Fisher-Yates from the last position down.
"""

from __future__ import annotations

import numpy as np

_TWO64 = 1 << 64


class SeededDraws:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self._bitgen = np.random.PCG64(self.seed)

    def _raw(self, size: int) -> np.ndarray:
        return np.asarray(self._bitgen.random_raw(size), dtype=np.uint64)

    def index(self, n: int) -> int:
        """One uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _TWO64 - (_TWO64 % n)
        while True:
            r = int(self._bitgen.random_raw())
            if r < limit:
                return r % n

    def indices(self, n: int, size: int) -> np.ndarray:
        """``size`` independent uniform integers in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _TWO64 - (_TWO64 % n)
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            raw = self._raw(size - filled)
            # compare as python ints only when limit exceeds uint64 range
            if limit >= _TWO64:
                ok = raw
            else:
                ok = raw[raw < np.uint64(limit)]
            take = ok[: size - filled]
            out[filled : filled + take.size] = (take % np.uint64(n)).astype(np.int64)
            filled += take.size
        return out

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.index(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def spawn_seed(self) -> int:
        """A child seed for an independent sub-stream (e.g. one tree)."""
        return int(self._bitgen.random_raw())
