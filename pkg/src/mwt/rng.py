"""Deterministic 64-bit random streams for reproducible parallel Monte Carlo.

Every replicate owns an independent SplitMix64 stream whose seed is a pure
function of (base_seed, replicate_index).  The mapping is injective in the
index for a fixed base, so replicates never share a stream, and results are
identical whether replicates run serially or across threads.

The stream layout is part of the reproducibility contract and must not
change between versions:

  * ``next_unit_pos``  -> uniform on (0, 1], used for exponential waits
    (``-log(u)`` is always finite);
  * ``next_unit``      -> uniform on [0, 1), used for event selection
    (``u * total`` is always strictly below ``total``).

The compiled kernels in ``_kernels`` implement the same generator with the
same draw order; ``tests/test_rng.py`` pins bit-for-bit equality.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
TWO_NEG53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche hash."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_for_replicate(base: int, index: int) -> int:
    """Derive the stream seed for one replicate.

    ``mix64(mix64(base) ^ (index * GOLDEN + 1))`` -- every step is a
    bijection of the index for fixed base (odd multiplier, xor with a
    constant, finalizer), so the map is injective over the full 64-bit
    index range.  Stable across versions.
    """
    return mix64(mix64(base & MASK64) ^ ((index * GOLDEN + 1) & MASK64))


class SplitMix64:
    """Counter-based 64-bit stream (state += golden gamma; output = mix64).

    Cheap to fork by seed, passes BigCrush, and trivially portable, which
    is what the replicate-per-stream execution model needs.  The pure-Python
    implementation exists for the reference simulation path and for tests;
    hot loops use the identical compiled version.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_unit(self) -> float:
        """Uniform on [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * TWO_NEG53

    def next_unit_pos(self) -> float:
        """Uniform on (0, 1]; safe as a log argument."""
        return ((self.next_u64() >> 11) + 1) * TWO_NEG53

    def exponential(self, rate: float) -> float:
        return -math.log(self.next_unit_pos()) / rate

    def spawn(self, index: int) -> "SplitMix64":
        """Independent child stream (used for ad-hoc substreams)."""
        return SplitMix64(seed_for_replicate(self.state, index))


def as_stream(rng: "SplitMix64 | int") -> SplitMix64:
    """Accept either a stream or a bare integer seed."""
    if isinstance(rng, SplitMix64):
        return rng
    return SplitMix64(int(rng))
