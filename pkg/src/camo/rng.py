"""SplitMix64 stream used wherever the toolkit needs seeded randomness.

A hand-rolled generator rather than :mod:`random` because obfuscation output
and test vectors must be bit-identical across Python versions and platforms.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_u32(self) -> int:
        return self.next_u64() >> 32

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` (rejection sampling, no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = MASK64 - (MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def random(self) -> float:
        """Uniform float in ``[0, 1)`` with 53 bits of precision."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def choice(self, seq):
        return seq[self.below(len(seq))]


def name_hash(name: str) -> int:
    """Stable 64-bit hash of a symbol name (``hash()`` is salted per process)."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def function_stream(seed: int, function_name: str) -> SplitMix64:
    """Per-function stream so results do not depend on function order."""
    return SplitMix64((seed ^ name_hash(function_name)) & MASK64)
