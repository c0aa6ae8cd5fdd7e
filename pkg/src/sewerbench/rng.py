"""Deterministic random streams derived from (root seed, integer path).

Every randomized component in the package draws from an RngStream addressed
by a path such as (repeat, fold, member). Derivation and generation are both
built on the splitmix64 avalanche permutation, so the sequence for a given
(root_seed, path) is bit-exact across platforms and across Python / numba
implementations (see _kernels.splitmix64_next for the compiled mirror).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_SEED_TWEAK = 0x5851F42D4C957F2D
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer: a 64-bit avalanche permutation."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_state(root_seed: int, path) -> int:
    """Collision-resistant 64-bit state for (root_seed, path).

    Each path element is absorbed through mix64, so sibling paths and
    prefix-extended paths land on unrelated states. Absorbing element by
    element makes derive_state(root, p1 + p2) reachable from the state of
    (root, p1), which RngStream.spawn relies on.
    """
    h = mix64((root_seed & _MASK64) ^ _SEED_TWEAK)
    for p in path:
        h = mix64((h + _GOLDEN) ^ mix64(p & _MASK64))
    return h


@dataclass
class RngStream:
    """splitmix64 generator over a derived state.

    Same (root_seed, path) -> identical draw sequence. Not thread-safe;
    derive one stream per unit of work instead of sharing.
    """

    root_seed: int
    path: tuple = ()
    _base: int = field(default=None, repr=False)
    _s: int = field(default=None, repr=False)
    _gauss_cache: float = field(default=None, repr=False)

    def __post_init__(self):
        if self._base is None:
            self._base = derive_state(self.root_seed, self.path)
        if self._s is None:
            self._s = self._base

    def spawn(self, *extra: int) -> "RngStream":
        """Child stream at path + extra, independent of draws made here."""
        base = self._base
        for p in extra:
            base = mix64((base + _GOLDEN) ^ mix64(p & _MASK64))
        return RngStream(self.root_seed, self.path + tuple(extra), _base=base)

    def state_u64(self) -> int:
        """Current internal state; compiled kernels continue the same
        splitmix64 sequence from this value."""
        return self._s

    def next_u64(self) -> int:
        self._s = (self._s + _GOLDEN) & _MASK64
        return mix64(self._s)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def normal(self) -> float:
        """Standard normal via Box-Muller; caches the second deviate."""
        if self._gauss_cache is not None:
            z = self._gauss_cache
            self._gauss_cache = None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * (1.0 / ((1 << 53) + 1))
        u2 = (self.next_u64() >> 11) * _INV_2_53
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss_cache = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def randint_below(self, n: int) -> int:
        """Integer in [0, n) via modulo (bias < 2**-32 for n < 2**32)."""
        if n <= 0:
            raise ValueError("randint_below needs n >= 1")
        return self.next_u64() % n

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates shuffle (works on lists and 1-D arrays)."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint_below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def permutation(self, n: int):
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def sample_without_replacement(self, n: int, k: int) -> list:
        """First k entries of a Fisher-Yates permutation of range(n)."""
        if k > n:
            raise ValueError("cannot sample more items than available")
        return self.permutation(n)[:k]


def derive_stream(root_seed: int, path=()) -> RngStream:
    """Public constructor: stream for (root_seed, path)."""
    return RngStream(root_seed, tuple(path))
