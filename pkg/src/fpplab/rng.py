"""Counter-based random streams: splitmix64 seeding of xoshiro256++.

Every Monte Carlo sample gets its own stream derived from ``(master, index)``,
so results never depend on how samples are scheduled across workers.
"""

from __future__ import annotations

from bisect import bisect_right

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def mix64(value: int) -> int:
    """First splitmix64 output from state ``value``."""
    return splitmix64(value & MASK64)[1]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """xoshiro256++ generator (Blackman & Vigna), pure integer arithmetic."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        state = seed & MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        if not any(words):
            words[0] = 1
        self.s0, self.s1, self.s2, self.s3 = words

    def state(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``range(n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def draw_indices(self, thresholds: list[int], count: int) -> list[int]:
        """Draw ``count`` atom indices by inverse CDF on 53-bit integers.

        ``thresholds[k]`` is ``floor(P[atom <= k] * 2**53)``; the last entry
        must be ``2**53``.
        """
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        out = [0] * count
        if len(thresholds) == 1:
            # point mass: still consume one draw per edge so streams stay aligned
            for _ in range(count):
                t = (s1 << 17) & MASK64
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= t
                s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
            self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
            return out
        cuts = thresholds[:-1]
        for i in range(count):
            x = (s0 + s3) & MASK64
            result = ((((x << 23) | (x >> 41)) & MASK64) + s0) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
            out[i] = bisect_right(cuts, result >> 11)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return out


def derive_stream(master: int, index: int) -> Xoshiro256pp:
    """Independent stream for sample ``index`` under seed ``master``.

    The generator is seeded by splitmix64 expansion of
    ``master XOR mix64(index)``.
    """
    if master < 0 or index < 0:
        raise ValueError("master seed and index must be non-negative")
    return Xoshiro256pp((master & MASK64) ^ mix64(index))
