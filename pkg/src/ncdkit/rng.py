"""Deterministic, language-portable random streams.

Everything that samples (synthetic data, episode draws) goes through the
counter-based SplitMix64 generator defined here, so a fixed seed produces
bit-identical artifacts regardless of platform, process or thread count.
The exact procedures (constants, output indexing, uniform/Gaussian
derivation, draw-without-replacement) are specified in
``docs/determinism.md``; any change there is a format break.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

_INV_2_53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def derive_seed(key: int, index: int) -> int:
    """Child seed for (key, index); also the index-th raw output of Stream(key)."""
    return mix64((key + (index + 1) * GOLDEN) & MASK64)


class Stream:
    """Counter-based SplitMix64 output stream for a 64-bit key.

    Output i is ``mix64(key + (i+1) * GOLDEN)``, identical to the classic
    stateful SplitMix64 sequence seeded with ``key``. Block requests are
    vectorized with numpy uint64 arithmetic and consume the same outputs
    as repeated scalar calls would.
    """

    def __init__(self, key: int):
        self.key = key & MASK64
        self._count = 0

    def next_raw(self) -> int:
        out = derive_seed(self.key, self._count)
        self._count += 1
        return out

    def raw_block(self, n: int) -> np.ndarray:
        start = self._count
        self._count += n
        counters = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        z = (np.uint64(self.key) + counters * np.uint64(GOLDEN)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        return z ^ (z >> np.uint64(31))

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return (self.next_raw() >> 11) * _INV_2_53

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw_block(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def randint_below(self, n: int) -> int:
        """Integer in [0, n); floor(u * n) on a [0,1) uniform."""
        if n <= 0:
            raise ValueError("randint_below requires n >= 1")
        v = int(self.uniform() * n)
        return min(v, n - 1)  # guards the u -> 1.0 rounding corner, unreachable for sane n

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normal doubles via Box-Muller.

        Consumes 2*ceil(n/2) raw outputs: even positions of the block give
        u1 in (0,1], odd positions u2 in [0,1); pair j yields
        r*cos(2*pi*u2) then r*sin(2*pi*u2) with r = sqrt(-2*ln(u1)).
        """
        if n == 0:
            return np.zeros(0)
        pairs = (n + 1) // 2
        raw = self.raw_block(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


def draw_without_replacement(stream: Stream, items: list, k: int) -> list:
    """Draw k items without replacement, in draw order.

    Keeps the remaining pool in its original order and removes the element
    at index floor(u * remaining) each draw, so the procedure is trivially
    reproducible from the raw uniform sequence.
    """
    if k > len(items):
        raise ValueError(f"cannot draw {k} from {len(items)} items")
    pool = list(items)
    picked = []
    for _ in range(k):
        idx = stream.randint_below(len(pool))
        picked.append(pool.pop(idx))
    return picked
