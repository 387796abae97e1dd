"""Pinned counter-based pseudorandomness.

Explicit configurations and deterministic solver start vectors must be
bit-reproducible across runs, thread counts and implementations, so the
generator is fixed here rather than delegated to the platform: SplitMix64
(Steele, Lea, Flood 2014), applied to a stateless mix of a 64-bit seed and
the integer coordinates of a group element.
"""

from __future__ import annotations

from typing import Iterable

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for the 64-bit state ``x``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_coords(seed: int, coords: Iterable[int]) -> int:
    """Stateless 64-bit hash of (seed, coords); order-sensitive."""
    h = splitmix64(seed & _MASK)
    for c in coords:
        h = splitmix64(h ^ (c & _MASK))
    return h


def letter_index(seed: int, coords: Iterable[int], n_letters: int) -> int:
    """Deterministic letter choice at a group element, uniform over letters."""
    return mix_coords(seed, coords) % n_letters


def unit_vector(seed: int, n: int):
    """Deterministic complex start vector for iterative solvers."""
    import numpy as np

    re = np.empty(n)
    im = np.empty(n)
    h = seed & _MASK
    for i in range(n):
        h = splitmix64(h)
        re[i] = (h >> 11) / float(1 << 53) - 0.5
        h = splitmix64(h)
        im[i] = (h >> 11) / float(1 << 53) - 0.5
    v = re + 1j * im
    return v / np.linalg.norm(v)
