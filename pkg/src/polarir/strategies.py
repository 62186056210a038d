"""The three reconciliation strategies behind one Alice/Bob interface.

All three correct Bob's sifted key toward Alice's over a classical
channel that leaks a syndrome payload plus a CRC tag:

* fbe: Alice encodes her sifted key, sends the n-k frozen-position values
  of the result, and keeps the information positions as her key.  Bob
  rebuilds the frozen-only word W, decodes k_sifted xor encode(W) with
  all-zero frozen bits, and reads his key off the decoded message.  The
  construction guarantees the effective codeword has zero frozen bits, so
  the decoder never needs variable frozen values.
* dd: Alice transforms her key to the message domain and sends the frozen
  positions; Bob decodes his sifted key directly using those received
  values as (variable) frozen bits.
* bfd: Alice masks a random codeword onto her key and sends the full
  n-bit mask; Bob decodes the unmasked word with all-zero frozen bits.
  The random information word comes from a seeded generator standing in
  for true random numbers.

fbe and dd never touch a random generator; bfd requires a seed.  Payload
sizes are n-k bits for fbe/dd and n bits for bfd, plus a d-bit CRC either
way; ``leaked_bits`` returns those counts.

Pass a prebuilt decoder to the Bob-side functions when calling from
multiple threads; the default uses the module-level cached instance,
which is not reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitblock import BitBlock, FrozenVector, extract, fill, xor
from .crc import CrcSpec, crc_compute
from .decoder import DecodeOutcome, DecoderConfig, _cached_decoder, llr_from_bsc
from .transform import encode

# Alias so tests can instrument random-number consumption per strategy.
_default_rng = np.random.default_rng

__all__ = [
    "StrategyConfig",
    "AliceOutput",
    "BobOutcome",
    "STRATEGIES",
    "fbe_alice",
    "fbe_bob",
    "dd_alice",
    "dd_bob",
    "bfd_alice",
    "bfd_bob",
    "alice_output",
    "bob_outcome",
    "leaked_bits",
]

STRATEGIES = ("fbe", "dd", "bfd")


@dataclass(frozen=True)
class StrategyConfig:
    """Settings shared by both parties of one reconciliation block."""

    strategy: str
    frozen: FrozenVector
    decoder: DecoderConfig
    crc: CrcSpec
    rng_seed: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "bfd":
            if self.rng_seed is None:
                raise ValueError("bfd requires rng_seed")
        elif self.rng_seed is not None:
            raise ValueError(f"{self.strategy} must not carry an rng_seed")
        if self.strategy == "dd" and self.decoder.mode == "fsscl":
            raise ValueError(
                "dd sends variable frozen values; the fast decoder supports "
                "all-zero frozen bits only, use mode 'scl' or 'ca_scl'"
            )
        if self.frozen != self.decoder.frozen:
            raise ValueError("strategy and decoder disagree on the frozen vector")
        if self.crc.width != self.decoder.crc_width:
            raise ValueError("strategy CRC and decoder crc_width disagree")


@dataclass(frozen=True)
class AliceOutput:
    """What Alice transmits (payload, CRC) and what she keeps (key)."""

    syndrome_payload: BitBlock
    crc_value: int
    key: BitBlock


@dataclass(frozen=True)
class BobOutcome:
    """Bob's extracted key plus the CRC verdict and raw decode result."""

    key: BitBlock
    success: bool
    decode: DecodeOutcome


def leaked_bits(strategy: str, n: int, k: int, d: int) -> int:
    """Classical-channel payload bits for one block.

    fbe and dd disclose the n-k syndrome positions; bfd discloses a full
    n-bit mask.  ``d`` adds the CRC tag; pass d=0 to count the syndrome
    alone so efficiency can be reported with or without CRC leakage.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not 0 < k < n:
        raise ValueError("need 0 < k < n")
    if d < 0:
        raise ValueError("d must be nonnegative")
    base = n if strategy == "bfd" else n - k
    return base + d


def _check_length(block: BitBlock, n: int, what: str) -> None:
    if len(block) != n:
        raise ValueError(f"{what} has length {len(block)}, expected {n}")


def fbe_alice(k_sifted: BitBlock, cfg: StrategyConfig) -> AliceOutput:
    """Encode the sifted key; the frozen positions are the payload."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    y = encode(k_sifted)
    payload = extract(y, frozen.mask)
    key = extract(y, frozen.info_mask)
    return AliceOutput(payload, crc_compute(key, cfg.crc), key)


def fbe_bob(
    k_sifted: BitBlock,
    syndrome_payload: BitBlock,
    crc_value: int,
    cfg: StrategyConfig,
    decoder=None,
    qber: float | None = None,
) -> BobOutcome:
    """Decode k_sifted xor encode(W) with all-zero frozen bits."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    if len(syndrome_payload) != frozen.num_frozen:
        raise ValueError(
            f"payload has {len(syndrome_payload)} bits, expected {frozen.num_frozen}"
        )
    w = fill(BitBlock.zeros(frozen.n), frozen.mask, syndrome_payload)
    x_prime = xor(k_sifted, encode(w))
    return _decode_to_outcome(x_prime, crc_value, cfg, decoder, None, qber)


def dd_alice(k_sifted: BitBlock, cfg: StrategyConfig) -> AliceOutput:
    """Transform the sifted key to the message domain; send frozen values."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    u = encode(k_sifted)  # the transform is an involution: u maps back to k_sifted
    payload = extract(u, frozen.mask)
    key = extract(u, frozen.info_mask)
    return AliceOutput(payload, crc_compute(key, cfg.crc), key)


def dd_bob(
    k_sifted: BitBlock,
    syndrome_payload: BitBlock,
    crc_value: int,
    cfg: StrategyConfig,
    decoder=None,
    qber: float | None = None,
) -> BobOutcome:
    """Decode the sifted key directly, frozen bits set to received values."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    if len(syndrome_payload) != frozen.num_frozen:
        raise ValueError(
            f"payload has {len(syndrome_payload)} bits, expected {frozen.num_frozen}"
        )
    return _decode_to_outcome(k_sifted, crc_value, cfg, decoder, syndrome_payload, qber)


def bfd_alice(k_sifted: BitBlock, cfg: StrategyConfig) -> AliceOutput:
    """Mask a seeded random codeword onto the key; send the n-bit mask."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    rng = _default_rng(np.random.SeedSequence(cfg.rng_seed))
    u = np.zeros(frozen.n, dtype=np.uint8)
    info_word = rng.integers(0, 2, frozen.num_info, dtype=np.uint8)
    u[frozen.info_positions] = info_word
    payload = xor(encode(BitBlock(u)), k_sifted)
    key = BitBlock(info_word)
    return AliceOutput(payload, crc_compute(key, cfg.crc), key)


def bfd_bob(
    k_sifted: BitBlock,
    syndrome_payload: BitBlock,
    crc_value: int,
    cfg: StrategyConfig,
    decoder=None,
    qber: float | None = None,
) -> BobOutcome:
    """Unmask with the received n-bit payload and decode zero-frozen."""
    frozen = cfg.frozen
    _check_length(k_sifted, frozen.n, "k_sifted")
    _check_length(syndrome_payload, frozen.n, "payload")
    noisy = xor(syndrome_payload, k_sifted)
    return _decode_to_outcome(noisy, crc_value, cfg, decoder, None, qber)


_ALICE = {"fbe": fbe_alice, "dd": dd_alice, "bfd": bfd_alice}
_BOB = {"fbe": fbe_bob, "dd": dd_bob, "bfd": bfd_bob}


def alice_output(k_sifted: BitBlock, cfg: StrategyConfig) -> AliceOutput:
    """Dispatch to the configured strategy's Alice side."""
    return _ALICE[cfg.strategy](k_sifted, cfg)


def bob_outcome(
    k_sifted: BitBlock,
    syndrome_payload: BitBlock,
    crc_value: int,
    cfg: StrategyConfig,
    decoder=None,
    qber: float | None = None,
) -> BobOutcome:
    """Dispatch to the configured strategy's Bob side."""
    return _BOB[cfg.strategy](k_sifted, syndrome_payload, crc_value, cfg, decoder, qber)


def _decode_to_outcome(hard_word, crc_value, cfg, decoder, frozen_values, qber) -> BobOutcome:
    """Run the hard-decision word through the configured decoder.

    Every input bit of a uniform binary symmetric channel carries the same
    LLR magnitude, and the min-sum updates are homogeneous of degree one,
    so the decoded output — ranking and tie pattern included — does not
    depend on that constant.  With qber=None the decoder therefore runs on
    unit-magnitude LLRs; passing the measured rate merely rescales the
    reported path metrics.
    """
    if decoder is None:
        decoder = _cached_decoder(cfg.decoder)
    if qber is None:
        llr = 1.0 - 2.0 * hard_word.bits.astype(np.float64)
    else:
        llr = llr_from_bsc(hard_word, qber)
    outcome = decoder.decode(llr, crc_target=crc_value, frozen_values=frozen_values)
    key = extract(outcome.u_hat, cfg.frozen.info_mask)
    return BobOutcome(key=key, success=outcome.crc_passed, decode=outcome)
