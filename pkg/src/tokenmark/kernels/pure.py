"""Pure-Python kernel backend.

Bit-for-bit identical to the compiled backend in ``_speed.pyx``: every
function here works on 64-bit unsigned values with explicit wraparound, and
the selection loop visits indices in exactly the same order.  Any change to
one backend must be mirrored in the other (``tests/test_kernels.py`` holds
the parity suite).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix-style stream increment and avalanche multipliers.
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Three-round shift-xor-multiply avalanche over a 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def advance(h: int, token_id: int) -> int:
    """One hash-chain step: fold a token id into the running 64-bit state."""
    return mix64((h ^ ((token_id + 1) * GOLDEN & MASK64)) & MASK64)


def stream_next(state: int) -> tuple[int, int]:
    """Advance the streamed generator; returns (new_state, output)."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def select_indices(seed: int, n: int, k: int) -> np.ndarray:
    """Pick k distinct indices from 0..n-1 by partial Fisher-Yates.

    The generator is the streamed avalanche seeded with ``seed``; the result
    is returned in selection order.  The modulo draw has negligible bias for
    the vocabulary sizes in play and, more importantly, is reproducible.
    """
    if not 0 <= k <= n:
        raise ValueError(f"cannot select {k} of {n} indices")
    idx = list(range(n))
    state = seed & MASK64
    for i in range(k):
        state, r = stream_next(state)
        j = i + r % (n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return np.array(idx[:k], dtype=np.int64)


def partition_member(seed: int, n: int, k: int) -> np.ndarray:
    """Boolean membership vector for ``select_indices(seed, n, k)``."""
    member = np.zeros(n, dtype=bool)
    member[select_indices(seed, n, k)] = True
    return member
