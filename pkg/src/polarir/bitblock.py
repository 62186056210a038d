"""Fixed-length bit vectors and frozen-position masks.

BitBlock is the common currency between the transform, the decoders and the
reconciliation strategies: an immutable vector of {0,1} values backed by a
read-only numpy array.  Lengths here are unrestricted; the polar transform
enforces its own power-of-two requirement.
"""

from __future__ import annotations

import numpy as np

__all__ = ["BitBlock", "FrozenVector", "extract", "fill", "mask_and", "xor"]


class BitBlock:
    """Immutable bit vector.

    Parameters
    ----------
    bits : array-like of int
        Values, each 0 or 1.  The data is copied; the copy is marked
        read-only so a block can be shared without defensive copies.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits) -> None:
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise ValueError(f"bits must be one-dimensional, got shape {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("bits must contain only 0 and 1")
        out = arr.astype(np.uint8, copy=True)
        out.setflags(write=False)
        self._bits = out

    @classmethod
    def zeros(cls, n: int) -> "BitBlock":
        if n < 0:
            raise ValueError(f"length must be nonnegative, got {n}")
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "BitBlock":
        # Internal fast path: takes ownership of a fresh uint8 array.
        obj = cls.__new__(cls)
        arr.setflags(write=False)
        obj._bits = arr
        return obj

    @property
    def bits(self) -> np.ndarray:
        """Read-only uint8 view of the bit values."""
        return self._bits

    def popcount(self) -> int:
        return int(self._bits.sum())

    def __len__(self) -> int:
        return self._bits.size

    def __getitem__(self, i: int) -> int:
        return int(self._bits[i])

    def __iter__(self):
        return iter(self._bits.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitBlock):
            return NotImplemented
        return self._bits.size == other._bits.size and bool(
            np.array_equal(self._bits, other._bits)
        )

    def __hash__(self) -> int:
        return hash((self._bits.size, self._bits.tobytes()))

    def __xor__(self, other: "BitBlock") -> "BitBlock":
        return xor(self, other)

    def __repr__(self) -> str:
        if len(self) <= 24:
            body = "".join(str(b) for b in self._bits)
        else:
            head = "".join(str(b) for b in self._bits[:16])
            body = f"{head}...[{len(self)} bits]"
        return f"BitBlock({body})"


class FrozenVector:
    """Mask of frozen positions over a block of length n.

    mask bit 1 means the position is frozen, 0 means it carries
    information.  Both the frozen and information index sets are
    precomputed since the decoders and strategies consult them per block.
    """

    __slots__ = ("_mask", "_info_mask", "_frozen_positions", "_info_positions")

    def __init__(self, mask) -> None:
        m = mask if isinstance(mask, BitBlock) else BitBlock(mask)
        num_frozen = m.popcount()
        if not 0 < num_frozen < len(m):
            raise ValueError(
                f"frozen count must satisfy 0 < count < n, got {num_frozen} of {len(m)}"
            )
        self._mask = m
        self._info_mask = BitBlock(m.bits ^ 1)
        self._frozen_positions = np.flatnonzero(m.bits).astype(np.int64)
        self._info_positions = np.flatnonzero(m.bits == 0).astype(np.int64)
        self._frozen_positions.setflags(write=False)
        self._info_positions.setflags(write=False)

    @classmethod
    def from_positions(cls, n: int, positions) -> "FrozenVector":
        mask = np.zeros(n, dtype=np.uint8)
        mask[np.asarray(positions, dtype=np.int64)] = 1
        return cls(mask)

    @property
    def mask(self) -> BitBlock:
        return self._mask

    @property
    def info_mask(self) -> BitBlock:
        """Complement of mask: 1 at every information position."""
        return self._info_mask

    @property
    def n(self) -> int:
        return len(self._mask)

    @property
    def num_frozen(self) -> int:
        return self._frozen_positions.size

    @property
    def num_info(self) -> int:
        return self._info_positions.size

    @property
    def frozen_positions(self) -> np.ndarray:
        return self._frozen_positions

    @property
    def info_positions(self) -> np.ndarray:
        return self._info_positions

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrozenVector):
            return NotImplemented
        return self._mask == other._mask

    def __hash__(self) -> int:
        return hash(self._mask)

    def __repr__(self) -> str:
        return f"FrozenVector(n={self.n}, num_frozen={self.num_frozen})"


def _check_same_length(u: BitBlock, v: BitBlock) -> None:
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")


def extract(u: BitBlock, v: BitBlock) -> BitBlock:
    """Bits of u at the positions where mask v is 1, ascending order."""
    _check_same_length(u, v)
    return BitBlock._wrap(u.bits[v.bits == 1].copy())


def fill(u: BitBlock, v: BitBlock, w: BitBlock) -> BitBlock:
    """Copy of u with the v==1 positions replaced by the bits of w in order.

    len(w) must equal popcount(v).
    """
    _check_same_length(u, v)
    k = v.popcount()
    if len(w) != k:
        raise ValueError(f"fill needs {k} bits, got {len(w)}")
    out = u.bits.copy()
    out[v.bits == 1] = w.bits
    return BitBlock._wrap(out)


def mask_and(u: BitBlock, v: BitBlock) -> BitBlock:
    """Elementwise AND of two equal-length blocks."""
    _check_same_length(u, v)
    return BitBlock._wrap(u.bits & v.bits)


def xor(u: BitBlock, v: BitBlock) -> BitBlock:
    """Elementwise XOR of two equal-length blocks."""
    _check_same_length(u, v)
    return BitBlock._wrap(u.bits ^ v.bits)
