"""Two-party reconciliation over a byte stream.

The wire protocol is four frames in fixed order — HELLO both ways, then
SYNDROME, CRC, and RESULT — each framed as a message-type byte plus a
big-endian u32 payload length.  HELLO carries the protocol version, block
length, strategy, CRC spec id, and a 32-byte hash of the frozen-bit code;
a mismatch on any of them aborts before key material moves.  Abort
conditions map to stable codes (hash mismatch, frame parse error, phase
violation, stream EOF) that the CLI turns into distinct exit statuses; a
locally detected abort is also sent to the peer as a bare frame whose
type byte is the abort code, so both ends fail with the same reason.

Bit packing is LSB-first within each byte in ascending position order,
zero-padded high in the final byte; unpacking rejects nonzero padding.

Every byte moved is tallied on the SessionState, so a session can assert
that classical-channel usage equals the strategy's leaked bits plus the
deterministic framing overhead.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .bitblock import BitBlock, FrozenVector
from .crc import crc_to_bits
from .metrics import ReconReport
from .strategies import (
    STRATEGIES,
    BobOutcome,
    StrategyConfig,
    alice_output,
    bob_outcome,
    leaked_bits,
)

__all__ = [
    "PROTOCOL_VERSION",
    "MSG_HELLO",
    "MSG_SYNDROME",
    "MSG_CRC",
    "MSG_RESULT",
    "ABORT_HASH_MISMATCH",
    "ABORT_FRAME",
    "ABORT_PHASE",
    "ABORT_EOF",
    "ABORT_CODES",
    "MAX_PAYLOAD",
    "TransportError",
    "SessionState",
    "pack_frame",
    "read_frame",
    "pack_syndrome",
    "unpack_syndrome",
    "construction_hash",
    "framing_overhead_bits",
    "alice_session",
    "bob_session",
]

PROTOCOL_VERSION = 1
MAX_PAYLOAD = 1 << 28

MSG_HELLO = 0x00
MSG_SYNDROME = 0x01
MSG_CRC = 0x02
MSG_RESULT = 0x03

ABORT_HASH_MISMATCH = 0x10
ABORT_FRAME = 0x11
ABORT_PHASE = 0x12
ABORT_EOF = 0x13
ABORT_CODES = (ABORT_HASH_MISMATCH, ABORT_FRAME, ABORT_PHASE, ABORT_EOF)

RESULT_OK = 0
RESULT_CRC_MISMATCH = 1

_STRATEGY_IDS = {name: i + 1 for i, name in enumerate(STRATEGIES)}
_STRATEGY_NAMES = {i: name for name, i in _STRATEGY_IDS.items()}

_HEADER = struct.Struct(">BI")
_HELLO = struct.Struct(">BIBB32s")
_RESULT = struct.Struct(">BB")


class TransportError(Exception):
    """Session abort carrying one of the ABORT_* codes."""

    def __init__(self, code: int, message: str):
        super().__init__(f"abort {code:#04x}: {message}")
        self.code = code


@dataclass
class SessionState:
    """Phase tracker and byte tally for one session end."""

    role: str
    phase: str = "hello"
    negotiated: dict | None = None
    bytes_sent: int = 0
    bytes_received: int = 0

    @property
    def wire_bits(self) -> int:
        return 8 * (self.bytes_sent + self.bytes_received)


def pack_frame(msg_type: int, payload: bytes) -> bytes:
    if not 0 <= msg_type <= 0xFF:
        raise ValueError(f"msg_type out of range: {msg_type}")
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload exceeds {MAX_PAYLOAD} bytes")
    return _HEADER.pack(msg_type, len(payload)) + payload


def read_frame(stream) -> tuple[int, bytes]:
    """Read one frame; EOF and oversize length raise TransportError."""
    header = _read_exact(stream, _HEADER.size)
    msg_type, length = _HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise TransportError(ABORT_FRAME, f"frame length {length} exceeds maximum")
    return msg_type, _read_exact(stream, length)


def _read_exact(stream, count: int) -> bytes:
    buf = b""
    while len(buf) < count:
        chunk = stream.read(count - len(buf))
        if not chunk:
            raise TransportError(ABORT_EOF, "stream ended mid-frame")
        buf += chunk
    return buf


def pack_syndrome(payload_bits: BitBlock) -> bytes:
    """LSB-first within each byte, ascending positions, zero-padded high."""
    return np.packbits(payload_bits.bits, bitorder="little").tobytes()


def unpack_syndrome(data: bytes, expected_bits: int) -> BitBlock:
    want = (expected_bits + 7) // 8
    if len(data) != want:
        raise TransportError(
            ABORT_FRAME, f"expected {want} payload bytes for {expected_bits} bits, got {len(data)}"
        )
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if bits[expected_bits:].any():
        raise TransportError(ABORT_FRAME, "nonzero padding bits")
    return BitBlock(bits[:expected_bits])


def construction_hash(frozen: FrozenVector) -> bytes:
    """32-byte digest of the code actually in force (n plus frozen mask).

    Two parties interoperate exactly when they freeze the same positions,
    so the hash covers the effective mask rather than the construction
    table it was derived from.
    """
    h = hashlib.sha256()
    h.update(struct.pack(">I", frozen.n))
    h.update(np.packbits(frozen.mask.bits, bitorder="little").tobytes())
    return h.digest()


def framing_overhead_bits(strategy: str, n: int, num_frozen: int, d: int) -> int:
    """Wire bits beyond the strategy's leaked payload, per session.

    Covers both HELLO frames, all four frame headers, the RESULT body,
    and the zero pad bits of the packed syndrome and CRC payloads.
    """
    header = 8 * _HEADER.size
    hello = header + 8 * _HELLO.size
    syndrome_bits = n if strategy == "bfd" else num_frozen
    syndrome = header + 8 * ((syndrome_bits + 7) // 8)
    crc = header + 8 * ((d + 7) // 8)
    result = header + 8 * _RESULT.size
    total = 2 * hello + syndrome + crc + result
    return total - leaked_bits(strategy, n, n - num_frozen, d)


def _send(stream, state: SessionState, msg_type: int, payload: bytes) -> None:
    data = pack_frame(msg_type, payload)
    stream.write(data)
    stream.flush()
    state.bytes_sent += len(data)


def _recv(stream, state: SessionState, expected_type: int) -> bytes:
    msg_type, payload = read_frame(stream)
    state.bytes_received += _HEADER.size + len(payload)
    if msg_type == expected_type:
        return payload
    if msg_type in ABORT_CODES:
        raise TransportError(msg_type, "peer aborted")
    _abort(stream, state, ABORT_PHASE, f"expected type {expected_type:#04x}, got {msg_type:#04x}")


def _abort(stream, state: SessionState, code: int, message: str):
    """Tell the peer why this end is giving up, then raise locally."""
    state.phase = "failed"
    try:
        _send(stream, state, code, b"")
    except (OSError, ValueError):
        pass  # peer already gone; the local error still carries the code
    raise TransportError(code, message)


def _hello_payload(cfg: StrategyConfig) -> bytes:
    return _HELLO.pack(
        PROTOCOL_VERSION,
        cfg.frozen.n,
        _STRATEGY_IDS[cfg.strategy],
        cfg.crc.spec_id,
        construction_hash(cfg.frozen),
    )


def _check_hello(stream, state: SessionState, payload: bytes, cfg: StrategyConfig) -> dict:
    if len(payload) != _HELLO.size:
        _abort(stream, state, ABORT_FRAME, f"hello payload is {len(payload)} bytes")
    version, n, strategy_id, crc_id, digest = _HELLO.unpack(payload)
    if version != PROTOCOL_VERSION:
        _abort(stream, state, ABORT_FRAME, f"peer speaks version {version}")
    if (
        n != cfg.frozen.n
        or strategy_id != _STRATEGY_IDS[cfg.strategy]
        or crc_id != cfg.crc.spec_id
        or digest != construction_hash(cfg.frozen)
    ):
        _abort(stream, state, ABORT_HASH_MISMATCH, "negotiation parameters disagree")
    return {
        "n": n,
        "strategy": _STRATEGY_NAMES[strategy_id],
        "crc_spec_id": crc_id,
        "construction_hash": digest,
    }


def alice_session(
    stream,
    k_sifted: BitBlock,
    cfg: StrategyConfig,
    state: SessionState | None = None,
    qber: float = 0.0,
) -> ReconReport:
    """Send syndrome and CRC, await Bob's verdict, report the block."""
    state = state if state is not None else SessionState(role="alice")
    out = alice_output(k_sifted, cfg)
    _send(stream, state, MSG_HELLO, _hello_payload(cfg))
    state.negotiated = _check_hello(stream, state, _recv(stream, state, MSG_HELLO), cfg)
    state.phase = "syndrome_sent"
    _send(stream, state, MSG_SYNDROME, pack_syndrome(out.syndrome_payload))
    state.phase = "crc_sent"
    crc_bits = BitBlock(crc_to_bits(out.crc_value, cfg.crc.width))
    _send(stream, state, MSG_CRC, pack_syndrome(crc_bits))
    success_byte, _reason = _RESULT.unpack(_recv(stream, state, MSG_RESULT))
    success = success_byte == 1
    state.phase = "done" if success else "failed"
    frozen = cfg.frozen
    return ReconReport(
        strategy=cfg.strategy,
        n=frozen.n,
        k=frozen.num_info,
        d=cfg.crc.width,
        qber=qber,
        list_size=cfg.decoder.list_size,
        trials=1,
        failures=0 if success else 1,
        decode_seconds_total=0.0,
        leaked_bits=leaked_bits(cfg.strategy, frozen.n, frozen.num_info, cfg.crc.width),
    )


def bob_session(
    stream,
    k_sifted: BitBlock,
    cfg: StrategyConfig,
    state: SessionState | None = None,
    decoder=None,
    qber: float | None = None,
) -> BobOutcome:
    """Receive syndrome and CRC, decode, and report success to Alice."""
    state = state if state is not None else SessionState(role="bob")
    state.negotiated = _check_hello(stream, state, _recv(stream, state, MSG_HELLO), cfg)
    _send(stream, state, MSG_HELLO, _hello_payload(cfg))
    expected = cfg.frozen.n if cfg.strategy == "bfd" else cfg.frozen.num_frozen
    syndrome = unpack_syndrome(_recv(stream, state, MSG_SYNDROME), expected)
    state.phase = "syndrome_sent"
    crc_bits = unpack_syndrome(_recv(stream, state, MSG_CRC), cfg.crc.width)
    state.phase = "crc_sent"
    crc_value = int.from_bytes(
        np.packbits(crc_bits.bits, bitorder="little").tobytes(), "little"
    )
    outcome = bob_outcome(k_sifted, syndrome, crc_value, cfg, decoder, qber)
    reason = RESULT_OK if outcome.success else RESULT_CRC_MISMATCH
    _send(stream, state, MSG_RESULT, _RESULT.pack(1 if outcome.success else 0, reason))
    state.phase = "done" if outcome.success else "failed"
    return outcome
