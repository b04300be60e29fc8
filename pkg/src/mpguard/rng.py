"""Portable seedable 64-bit generator.

Streams are xorshift64* (Vigna 2014):

    x ^= x >> 12; x ^= x << 25; x ^= x >> 27
    out = x * 0x2545F4914F6CDD1D  (mod 2**64)

State is seeded through splitmix64 so that any integer seed (including 0)
yields a non-zero state, and independent sub-streams are derived by mixing
the seed with a stream id. Everything is plain integer arithmetic, so draws
are identical on every platform.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MULT = 0x2545F4914F6CDD1D


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class XorShift64Star:
    __slots__ = ("state",)

    def __init__(self, seed: int, stream: int = 0):
        s = (int(seed) & MASK64) ^ ((int(stream) * _GOLDEN) & MASK64)
        s, out = splitmix64(s)
        _, out2 = splitmix64(s ^ out)
        self.state = out2 or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & MASK64

    def uniform_open(self) -> float:
        """Uniform double strictly inside (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) / 9007199254740992.0

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """First ``k`` slots of a partial Fisher-Yates shuffle of range(n)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} of {n}")
        swapped: dict[int, int] = {}
        out = []
        for i in range(k):
            j = i + self.below(n - i)
            vi, vj = swapped.get(i, i), swapped.get(j, j)
            swapped[j] = vi
            out.append(vj)
        return out
