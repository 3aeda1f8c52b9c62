# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Mirrors ``tokenmark.kernels.pure`` exactly; see that module for the contract.
Hot paths: the per-token vocabulary partition (partial Fisher-Yates over up
to ~32k indices) and the hash-chain step.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15u
cdef uint64_t MIX_A = 0xBF58476D1CE4E5B9u
cdef uint64_t MIX_B = 0x94D049BB133111EBu


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX_A
    z = (z ^ (z >> 27)) * MIX_B
    return z ^ (z >> 31)


def mix64(z):
    """Three-round shift-xor-multiply avalanche over a 64-bit value."""
    return int(_mix64(<uint64_t> z))


def advance(h, token_id):
    """One hash-chain step: fold a token id into the running 64-bit state."""
    cdef uint64_t hh = <uint64_t> h
    cdef uint64_t t = (<uint64_t> token_id + 1u) * GOLDEN
    return int(_mix64(hh ^ t))


def stream_next(state):
    """Advance the streamed generator; returns (new_state, output)."""
    cdef uint64_t s = (<uint64_t> state) + GOLDEN
    return int(s), int(_mix64(s))


def select_indices(seed, n, k):
    """Pick k distinct indices from 0..n-1 by partial Fisher-Yates."""
    cdef Py_ssize_t cn = n, ck = k, i, j
    if ck < 0 or ck > cn:
        raise ValueError(f"cannot select {k} of {n} indices")
    cdef uint64_t state = <uint64_t> seed
    out = np.empty(cn, dtype=np.int64)
    cdef int64_t[::1] idx = out
    cdef int64_t tmp
    for i in range(cn):
        idx[i] = i
    for i in range(ck):
        state = state + GOLDEN
        j = i + <Py_ssize_t> (_mix64(state) % <uint64_t> (cn - i))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
    return out[:ck]


def partition_member(seed, n, k):
    """Boolean membership vector for ``select_indices(seed, n, k)``."""
    cdef Py_ssize_t cn = n, ck = k, i, j
    if ck < 0 or ck > cn:
        raise ValueError(f"cannot select {k} of {n} indices")
    cdef uint64_t state = <uint64_t> seed
    idx_arr = np.empty(cn, dtype=np.int64)
    member_arr = np.zeros(cn, dtype=np.uint8)
    cdef int64_t[::1] idx = idx_arr
    cdef unsigned char[::1] member = member_arr
    cdef int64_t tmp
    for i in range(cn):
        idx[i] = i
    for i in range(ck):
        state = state + GOLDEN
        j = i + <Py_ssize_t> (_mix64(state) % <uint64_t> (cn - i))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
        member[idx[i]] = 1
    return member_arr.view(bool)
