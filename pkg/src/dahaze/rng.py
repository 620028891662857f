"""Deterministic pseudo-random number generation.

Self-contained reimplementation of splitmix64 and xoshiro256** from
their published reference constants.  Streams are bit-identical across
platforms and Python versions, which is what makes manifests and
synthesized datasets reproducible from a single 64-bit seed.  Nothing
here depends on Python's ``random`` module or on NumPy's generators,
whose streams are implementation details of their libraries.

All state is explicit: construct a :class:`Xoshiro256StarStar` from a
seed and pass it around.  Derive independent child streams with
:func:`sub_seed` so replicated work (e.g. dataset replicas) never
shares or splits a stream implicitly.
"""

from __future__ import annotations

from .errors import UsageError

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """Return the first splitmix64 output for the given 64-bit state.

    splitmix64 is used in two places: to expand a user seed into the
    four 64-bit words of xoshiro256** state, and (via :func:`sub_seed`)
    to derive decorrelated child seeds.

    Parameters
    ----------
    state : int
        Unsigned 64-bit state value (larger ints are masked).

    Returns
    -------
    int
        The first output of the splitmix64 sequence seeded at ``state``.
    """
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sub_seed(seed: int, k: int) -> int:
    """Derive the k-th child seed: ``splitmix64(seed XOR k)``.

    Child streams for distinct ``k`` are decorrelated by the splitmix64
    mixing function.  The derivation is documented (and fixed) so that
    any artifact recording ``(seed, k)`` can be regenerated exactly.
    """
    return splitmix64((seed & _MASK64) ^ (k & _MASK64))


class Xoshiro256StarStar:
    """xoshiro256** generator with splitmix64 state expansion.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.  The four state words are the first four
        outputs of the splitmix64 stream started at ``seed``.
    """

    def __init__(self, seed: int):
        s = seed & _MASK64
        state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            state.append(z ^ (z >> 31))
        self._s = state

    def next_u64(self) -> int:
        """Return the next unsigned 64-bit output."""
        s = self._s
        x = (s[1] * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & _MASK64
        return result

    def random(self) -> float:
        """Return a float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        """Return a float uniformly distributed in [lo, hi)."""
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Return an integer uniformly distributed in [0, n).

        Uses rejection sampling so every value is exactly equally
        likely (no modulo bias), with integer arithmetic only so the
        result is identical on every platform.
        """
        if n <= 0:
            raise UsageError("randbelow requires a positive bound")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def choice(self, seq):
        """Return a uniformly chosen element of a non-empty sequence."""
        if len(seq) == 0:
            raise UsageError("cannot choose from an empty sequence")
        return seq[self.randbelow(len(seq))]

    def shuffle(self, items: list) -> None:
        """Shuffle a list in place with a Fisher-Yates pass.

        Iterates from the last element down, swapping each position
        with a uniformly chosen earlier (or same) position.
        """
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
