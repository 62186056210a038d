"""Polar transform: GF(2) butterfly with bit-reversed output order.

The codeword is x = u * F^(x)m * B_n where F = [[1,0],[1,1]], F^(x)m is the
m-fold Kronecker power and B_n the bit-reversal permutation, so the butterfly
runs over natural input order and the output is permuted once at the end.
The transform is an involution: encode(encode(u)) == u for every u.

The decoders consume channel values through the same TransformParams
bit-reversal map; keeping a single shared index map avoids the classic
mismatch where encoder and decoder disagree about which of
F^(x)m / B_n*F^(x)m they implement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bitblock import BitBlock

__all__ = ["TransformParams", "encode", "bit_reverse_permute"]


def _validate_block_length(n: int) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"block length must be a power of two >= 2, got {n}")


@lru_cache(maxsize=None)
def _bit_reversal_table(n: int) -> np.ndarray:
    m = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(m):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.setflags(write=False)
    return rev


@dataclass(frozen=True)
class TransformParams:
    """Precomputed transform constants for one block length."""

    n: int
    stages: int
    bit_reversal: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def for_block_length(cls, n: int) -> "TransformParams":
        _validate_block_length(n)
        return cls(n=n, stages=n.bit_length() - 1, bit_reversal=_bit_reversal_table(n))


def _butterfly(bits: np.ndarray) -> np.ndarray:
    # In place u <- u * F^(x)m in natural order, O(n log n).
    n = bits.size
    half = 1
    while half < n:
        step = half * 2
        view = bits.reshape(-1, step)
        view[:, :half] ^= view[:, half:]
        half = step
    return bits


def encode(u: BitBlock, params: TransformParams | None = None) -> BitBlock:
    """Apply the transform to a block whose length is a power of two."""
    if params is None:
        params = TransformParams.for_block_length(len(u))
    elif params.n != len(u):
        raise ValueError(f"params are for n={params.n}, block has length {len(u)}")
    out = _butterfly(u.bits.copy())
    return BitBlock._wrap(out[params.bit_reversal])


def bit_reverse_permute(u: BitBlock) -> BitBlock:
    """Reorder a block by bit-reversed index (self-inverse)."""
    _validate_block_length(len(u))
    return BitBlock._wrap(u.bits[_bit_reversal_table(len(u))].copy())
