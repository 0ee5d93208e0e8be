"""Deterministic pseudorandom primitives built on splitmix64.

Every random draw in this package flows through these functions. State is a
plain 64-bit integer threaded explicitly through callers, so any computation
is a pure function of its seed: same state in, same (value, state) out. No
global state, no dependence on platform RNGs.

Reference: splitmix64 as published by Sebastiano Vigna (the generator behind
java.util.SplittableRandom); first output for seed 0 is 0xE220A8397B1DCDAF.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: 2**-53, converts the top 53 bits of a draw to a float in [0, 1).
_INV53 = 1.0 / (1 << 53)


def mix64(x: int) -> int:
    """The splitmix64 output function: two xor-shift-multiply rounds plus a
    final shift. Bijective on 64-bit integers."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def rng_next(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step. Returns (64-bit value, next state)."""
    nxt = (state + _GOLDEN) & MASK64
    return mix64(nxt), nxt


def rng_uniform(state: int) -> tuple[float, int]:
    """Uniform float in [0, 1): top 53 bits of the next draw over 2**53."""
    v, state = rng_next(state)
    return (v >> 11) * _INV53, state


def rng_gauss(state: int) -> tuple[float, int]:
    """Standard normal via Box-Muller; consumes exactly two uniforms."""
    u1, state = rng_uniform(state)
    u2, state = rng_uniform(state)
    # 1 - u1 keeps the log argument in (0, 1], avoiding log(0).
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    return r * math.cos(2.0 * math.pi * u2), state


def rng_below(state: int, n: int) -> tuple[int, int]:
    """Integer in [0, n) derived from one uniform draw."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    u, state = rng_uniform(state)
    k = int(u * n)
    if k >= n:  # guards u*n rounding up to n
        k = n - 1
    return k, state


def rng_bytes(state: int, n: int) -> tuple[bytes, int]:
    """n pseudorandom bytes, little-endian per 8-byte draw."""
    out = bytearray()
    while len(out) < n:
        v, state = rng_next(state)
        out += v.to_bytes(8, "little")
    return bytes(out[:n]), state


def derive_seed(master: int, index: int) -> int:
    """Seed-splitting: an independent child seed for stream ``index``.

    Defined as the splitmix64 output at state offset ``master + index``, so
    children of adjacent indices are decorrelated by the mix function.
    """
    return mix64((master + index + _GOLDEN) & MASK64)


def uniform_array(state: int, count: int) -> tuple["np.ndarray", int]:
    """``count`` uniforms in draw order; convenience for bulk fills."""
    out = np.empty(count)
    for i in range(count):
        u, state = rng_uniform(state)
        out[i] = u
    return out, state


def shuffled_indices(state: int, n: int) -> tuple[list[int], int]:
    """Fisher-Yates permutation of range(n), fully determined by state."""
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j, state = rng_below(state, i + 1)
        order[i], order[j] = order[j], order[i]
    return order, state


def sample_indices(state: int, n: int, k: int) -> tuple[list[int], int]:
    """k distinct indices from range(n), in selection order."""
    if k > n:
        raise ParameterError(f"cannot sample {k} from {n}")
    pool = list(range(n))
    picked = []
    for i in range(k):
        j, state = rng_below(state, n - i)
        picked.append(pool[j])
        pool[j] = pool[n - 1 - i]
    return picked, state
