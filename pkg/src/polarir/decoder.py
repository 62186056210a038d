"""Successive-cancellation decoding: SC, SCL, CA-SCL, and fast-SSCL.

LLRs use the convention llr = log(P(x=0)/P(x=1)), so positive values
favor bit 0.  Inputs are clamped to +/-`LLR_CLAMP` and quantized to a
fixed-point grid before decoding; equal-magnitude channel LLRs (the BSC
case) therefore produce exact integer metric ties, and the tie-break is
deterministic: lower metric wins, then the continue branch beats the fork,
then the lower-ranked parent wins.  The fast decoder collapses all-frozen
and repetition subtrees with updates that are exactly equal to the
bit-by-bit schedule (see _kernels), so `mode="fsscl"` and `mode="scl"`
return identical outcomes on every input, metric ties included.

A decoder instance owns preallocated scratch and is not reentrant; build
one instance per thread.  The module-level functions keep a small cache of
instances keyed by configuration for single-threaded convenience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from ._kernels import (
    OP_COMBINE,
    OP_F,
    OP_G,
    OP_LEAF_FROZEN,
    OP_LEAF_INFO,
    OP_RATE0,
    OP_REP,
)
from .bitblock import BitBlock, FrozenVector
from .crc import CRC8_SPEC, CRC16_SPEC, CRC32_SPEC, crc_compute
from .transform import TransformParams

__all__ = [
    "LLR_CLAMP",
    "DecoderConfig",
    "DecodeOutcome",
    "ScDecoder",
    "ListDecoder",
    "llr_from_bsc",
    "sc_decode",
    "scl_decode",
    "fsscl_decode",
]

LLR_CLAMP = 40.0
_SCALE = float(1 << _kernels.LLR_SCALE_BITS)
_MODES = ("sc", "scl", "ca_scl", "fsscl")
_CRC_BY_WIDTH = {8: CRC8_SPEC, 16: CRC16_SPEC, 32: CRC32_SPEC}
_MAX_LIST = 1 << 10


@dataclass(frozen=True)
class DecoderConfig:
    """Immutable decoder settings.

    ``crc_width`` selects which CRC checks candidates in CRC-aided modes;
    it is carried even for plain modes so configs can be reused.
    """

    frozen: FrozenVector
    mode: str = "scl"
    list_size: int = 1
    crc_width: int = 32

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown decoder mode {self.mode!r}")
        ls = self.list_size
        if ls < 1 or ls > _MAX_LIST or (ls & (ls - 1)) != 0:
            raise ValueError("list_size must be a power of two between 1 and 1024")
        if self.mode == "sc" and ls != 1:
            raise ValueError("sc mode requires list_size=1")
        if self.crc_width not in _CRC_BY_WIDTH:
            raise ValueError("crc_width must be 8, 16, or 32")

    @property
    def crc_spec(self):
        return _CRC_BY_WIDTH[self.crc_width]


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of one decode call.

    ``u_hat`` is the message-domain estimate of the selected path,
    including the values used at frozen positions.  ``path_metrics`` lists
    all surviving path metrics in ascending rank order and
    ``selected_path`` indexes into it.  ``crc_passed`` is only meaningful
    when a CRC target was supplied; ``candidates_checked`` counts CRC
    evaluations performed during selection.
    """

    u_hat: BitBlock
    selected_path: int
    path_metrics: tuple
    crc_passed: bool
    candidates_checked: int


def llr_from_bsc(block, qber: float) -> np.ndarray:
    """Channel LLRs for hard bits observed through a BSC(qber)."""
    if not 0.0 < qber < 0.5:
        raise ValueError("qber must lie in (0, 0.5)")
    bits = block.bits if isinstance(block, BitBlock) else np.asarray(block, dtype=np.uint8)
    mag = min(math.log((1.0 - qber) / qber), LLR_CLAMP)
    return (1.0 - 2.0 * bits.astype(np.float64)) * mag


def _quantize(llr: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(llr, dtype=np.float64), -LLR_CLAMP, LLR_CLAMP)
    return np.rint(clipped * _SCALE).astype(np.int64)


def _classify(mask: np.ndarray) -> int:
    """Map a frozen-mask segment to a fast-plan opcode, or -1 to split.

    The node-type tree distinguishes four patterns (all frozen, all
    information, frozen-then-one-information, parity-then-information),
    but only the first and third collapse: those are the ones whose
    collapsed metric updates and fork events provably equal the
    bit-by-bit schedule on every input, ties included.  The other two
    split into their children, so an all-information subtree decodes
    leaf by leaf and a single-parity subtree decodes as a frozen leaf
    plus information leaves (its width-2 tail nodes collapse as REP).
    """
    width = mask.shape[0]
    total = int(mask.sum())
    if total == width:
        return OP_RATE0
    if width >= 2 and total == width - 1 and mask[-1] == 0:
        return OP_REP
    return -1


def _build_plan(frozen: FrozenVector, fast: bool):
    """Emit the op schedule for one full decode, in recursion order."""
    n = frozen.n
    m = n.bit_length() - 1
    mask = frozen.mask.bits
    ops: list[tuple[int, int, int, int]] = []

    def visit(depth: int, node: int, lo: int, hi: int) -> None:
        if fast and depth > 0:
            code = _classify(mask[lo:hi])
            if code >= 0 and hi - lo >= 2:
                ops.append((code, depth, node, lo))
                return
        if hi - lo == 1:
            leaf_op = OP_LEAF_FROZEN if mask[lo] else OP_LEAF_INFO
            ops.append((leaf_op, m, node, lo))
            return
        mid = (lo + hi) // 2
        ops.append((OP_F, depth + 1, 2 * node, lo))
        visit(depth + 1, 2 * node, lo, mid)
        ops.append((OP_G, depth + 1, 2 * node + 1, mid))
        visit(depth + 1, 2 * node + 1, mid, hi)
        if depth >= 1:
            ops.append((OP_COMBINE, depth + 1, 2 * node + 1, lo))

    visit(0, 0, 0, n)
    arr = np.asarray(ops, dtype=np.int64)
    return (
        arr[:, 0].astype(np.int8),
        arr[:, 1].astype(np.int8),
        arr[:, 2].astype(np.int32),
        arr[:, 3].astype(np.int32),
    )


class ScDecoder:
    """Plain successive cancellation; the L=1 reference path."""

    def __init__(self, config: DecoderConfig):
        if config.mode != "sc":
            raise ValueError("ScDecoder requires mode='sc'")
        self.config = config
        self._params = TransformParams.for_block_length(config.frozen.n)
        self._mask = config.frozen.mask.bits.astype(np.int8)

    def decode(self, llr, crc_target=None, frozen_values=None) -> DecodeOutcome:
        frozen = self.config.frozen
        n = frozen.n
        q = _quantize(llr)
        if q.shape[0] != n:
            raise ValueError(f"expected {n} LLRs, got {q.shape[0]}")
        vals = _frozen_values_array(frozen, frozen_values)
        root = q[self._params.bit_reversal]
        u_hat, metric = _kernels.sc_decode_core(root, self._mask, vals, self._params.stages)
        u_block = BitBlock(u_hat)
        passed = False
        checked = 0
        if crc_target is not None:
            checked = 1
            info = u_hat[frozen.info_positions]
            passed = crc_compute(info, self.config.crc_spec) == crc_target
        return DecodeOutcome(
            u_hat=u_block,
            selected_path=0,
            path_metrics=(metric / _SCALE,),
            crc_passed=passed,
            candidates_checked=checked,
        )


class ListDecoder:
    """List decoder running either the bit-by-bit or the fast op plan."""

    def __init__(self, config: DecoderConfig):
        if config.mode == "sc":
            raise ValueError("use ScDecoder for mode='sc'")
        self.config = config
        frozen = config.frozen
        n = frozen.n
        m = n.bit_length() - 1
        size = config.list_size
        fast = config.mode == "fsscl"
        self._fast = fast
        self._params = TransformParams.for_block_length(n)
        self._plan = _build_plan(frozen, fast)
        widths = [n >> d for d in range(m + 1)]
        llr_off = np.zeros(m + 1, dtype=np.int64)
        bits_off = np.zeros(m + 1, dtype=np.int64)
        acc_l = 0
        acc_b = 0
        for d in range(1, m + 1):
            llr_off[d] = acc_l
            bits_off[d] = acc_b
            acc_l += size * widths[d]
            acc_b += size * 2 * widths[d]
        self._llr_off = llr_off
        self._bits_off = bits_off
        self._llr_pool = np.empty(acc_l, dtype=np.int64)
        self._bits_pool = np.empty(acc_b, dtype=np.int8)
        shape = (m + 1, size)
        self._p2b_llr = np.zeros(shape, dtype=np.int32)
        self._ref_llr = np.zeros(shape, dtype=np.int32)
        self._free_llr = np.zeros(shape, dtype=np.int32)
        self._free_sp_llr = np.zeros(m + 1, dtype=np.int64)
        self._p2b_bits = np.zeros(shape, dtype=np.int32)
        self._ref_bits = np.zeros(shape, dtype=np.int32)
        self._free_bits = np.zeros(shape, dtype=np.int32)
        self._free_sp_bits = np.zeros(m + 1, dtype=np.int64)
        self._metrics = np.zeros(size, dtype=np.int64)
        self._cont = np.zeros(size, dtype=np.int64)
        self._fork = np.zeros(size, dtype=np.int64)
        self._cand_key = np.zeros(2 * size, dtype=np.int64)
        self._sel_parent = np.zeros(size, dtype=np.int32)
        self._sel_fork = np.zeros(size, dtype=np.int8)
        self._new_p2b_llr = np.zeros(shape, dtype=np.int32)
        self._new_p2b_bits = np.zeros(shape, dtype=np.int32)
        self._out_cw = np.zeros((size, n), dtype=np.int8)
        self._out_metrics = np.zeros(size, dtype=np.int64)
        self._mask = frozen.mask.bits.astype(np.int8)

    def decode(self, llr, crc_target=None, frozen_values=None) -> DecodeOutcome:
        config = self.config
        frozen = config.frozen
        n = frozen.n
        if config.mode == "ca_scl" and crc_target is None:
            raise ValueError("ca_scl mode requires a crc_target")
        if self._fast and frozen_values is not None:
            raise ValueError("fsscl mode supports all-zero frozen values only")
        q = _quantize(llr)
        if q.shape[0] != n:
            raise ValueError(f"expected {n} LLRs, got {q.shape[0]}")
        vals = _frozen_values_array(frozen, frozen_values)
        root = np.ascontiguousarray(q[self._params.bit_reversal])
        op_code, op_depth, op_node, op_aux = self._plan
        n_paths = _kernels.run_plan(
            op_code, op_depth, op_node, op_aux,
            root, vals,
            config.list_size, self._params.stages, n,
            self._llr_pool, self._llr_off, self._bits_pool, self._bits_off,
            self._p2b_llr, self._ref_llr, self._free_llr, self._free_sp_llr,
            self._p2b_bits, self._ref_bits, self._free_bits, self._free_sp_bits,
            self._metrics, self._cont, self._fork, self._cand_key,
            self._sel_parent, self._sel_fork,
            self._new_p2b_llr, self._new_p2b_bits,
            self._out_cw, self._out_metrics,
        )
        u_rows = self._out_cw[:n_paths].copy()
        _butterfly_rows(u_rows)
        metrics = tuple(float(v) / _SCALE for v in self._out_metrics[:n_paths])
        selected = 0
        passed = False
        checked = 0
        if crc_target is not None:
            # Plain "scl" keeps the best-metric path and only reports its CRC
            # verdict; "ca_scl" (and "fsscl" given a target) walks the ranked
            # list and selects the first path whose information bits match.
            spec = config.crc_spec
            info_cols = frozen.info_positions
            limit = 1 if config.mode == "scl" else n_paths
            for r in range(limit):
                checked += 1
                if crc_compute(u_rows[r, info_cols], spec) == crc_target:
                    selected = r
                    passed = True
                    break
        return DecodeOutcome(
            u_hat=BitBlock(u_rows[selected]),
            selected_path=selected,
            path_metrics=metrics,
            crc_passed=passed,
            candidates_checked=checked,
        )


def _frozen_values_array(frozen: FrozenVector, frozen_values) -> np.ndarray:
    vals = np.zeros(frozen.n, dtype=np.int8)
    if frozen_values is not None:
        fv = frozen_values.bits if isinstance(frozen_values, BitBlock) else np.asarray(frozen_values, dtype=np.uint8)
        if fv.shape[0] != frozen.num_frozen:
            raise ValueError("frozen_values length must equal the frozen count")
        vals[frozen.frozen_positions] = fv.astype(np.int8)
    return vals


def _butterfly_rows(rows: np.ndarray) -> None:
    """In-place inverse transform of each row (the transform is an involution)."""
    n = rows.shape[1]
    half = 1
    while half < n:
        step = 2 * half
        view = rows.reshape(rows.shape[0], -1, step)
        view[:, :, :half] ^= view[:, :, half:]
        half = step


def make_decoder(config: DecoderConfig):
    """Build a fresh decoder instance owning its own scratch memory.

    Use one instance per thread: instances hold mutable work buffers, so a
    single instance must not decode concurrent blocks.
    """
    return ScDecoder(config) if config.mode == "sc" else ListDecoder(config)


@lru_cache(maxsize=16)
def _cached_decoder(config: DecoderConfig):
    return make_decoder(config)


def sc_decode(llr, config: DecoderConfig, crc_target=None, frozen_values=None) -> DecodeOutcome:
    """Successive-cancellation decode; ``config.mode`` must be "sc"."""
    if config.mode != "sc":
        raise ValueError("sc_decode requires a config with mode='sc'")
    return _cached_decoder(config).decode(llr, crc_target, frozen_values)


def scl_decode(llr, config: DecoderConfig, crc_target=None, frozen_values=None) -> DecodeOutcome:
    """List decode with the bit-by-bit schedule ("scl" or "ca_scl" mode)."""
    if config.mode not in ("scl", "ca_scl"):
        raise ValueError("scl_decode requires mode='scl' or 'ca_scl'")
    return _cached_decoder(config).decode(llr, crc_target, frozen_values)


def fsscl_decode(llr, config: DecoderConfig, crc_target=None) -> DecodeOutcome:
    """List decode with the pruned-subtree schedule ("fsscl" mode)."""
    if config.mode != "fsscl":
        raise ValueError("fsscl_decode requires mode='fsscl'")
    return _cached_decoder(config).decode(llr, crc_target, None)
