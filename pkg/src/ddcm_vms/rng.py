"""xoshiro256** generator seeded through splitmix64.

The noise draws must be bit-reproducible independent of numpy's bit
generators, so the algorithm is pinned here in plain integer arithmetic.
"""
from __future__ import annotations

from .errors import InvalidArgument

MASK64 = (1 << 64) - 1


def splitmix64(state):
    """Advance ``state`` and return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    def __init__(self, seed):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InvalidArgument("seed must be an integer")
        if not 0 <= seed <= MASK64:
            raise InvalidArgument("seed must fit in an unsigned 64-bit integer")
        st = seed
        self.s = []
        for _ in range(4):
            st, out = splitmix64(st)
            self.s.append(out)

    def next_u64(self):
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_symmetric(self, delta, count):
        """``count`` draws ``delta * (2u - 1)`` in generation order."""
        return [delta * (2.0 * self.uniform() - 1.0) for _ in range(count)]
