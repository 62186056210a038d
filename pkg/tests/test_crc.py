"""Cyclic-redundancy-check tests.

Oracles: the classic check value of each variant (the CRC of the ASCII
bytes "123456789"), zlib.crc32 for byte-aligned 32-bit checks, and a
pure-Python MSB-first polynomial long division written here from the
textbook definition (left shifts, non-reflected polynomial) so that it
shares no code with the package's right-shifting reflected routine.
"""

import json
import zlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarir import (
    CRC8_SPEC,
    CRC16_SPEC,
    CRC32_SPEC,
    BitBlock,
    CrcSpec,
    crc_compute,
    crc_to_bits,
    spec_for_id,
)

GOLDEN = Path(__file__).parent / "golden" / "crc_vectors.json"
ALL_SPECS = (CRC32_SPEC, CRC16_SPEC, CRC8_SPEC)


def reflect(value: int, width: int) -> int:
    out = 0
    for _ in range(width):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


def crc_long_division(bits, spec: CrcSpec) -> int:
    """MSB-first mirror of the reflected algorithm, for cross-checking."""
    reg = reflect(spec.init, spec.width)
    mask = (1 << spec.width) - 1
    for b in bits:
        cond = ((reg >> (spec.width - 1)) ^ int(b)) & 1
        reg = ((reg << 1) & mask) ^ (spec.poly if cond else 0)
    return reflect(reg, spec.width) ^ spec.xor_out


def byte_bits(data: bytes) -> np.ndarray:
    """Bytes as a bit stream, LSB first within each byte."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")


class TestCheckValues:
    """The published check values pin each variant's parameters exactly."""

    CHECK_BITS = byte_bits(b"123456789")

    def test_crc32(self):
        assert crc_compute(self.CHECK_BITS, CRC32_SPEC) == 0xCBF43926

    def test_crc16(self):
        assert crc_compute(self.CHECK_BITS, CRC16_SPEC) == 0xBB3D

    def test_crc8(self):
        assert crc_compute(self.CHECK_BITS, CRC8_SPEC) == 0xA1

    def test_empty_input_is_zero(self):
        for spec in ALL_SPECS:
            assert crc_compute(np.zeros(0, dtype=np.uint8), spec) == 0

    def test_crc32_is_default_spec(self):
        assert crc_compute(self.CHECK_BITS) == 0xCBF43926

    def test_bitblock_and_array_inputs_agree(self):
        bits = np.array([1, 0, 1, 1, 0, 1, 0, 0, 1], dtype=np.uint8)
        assert crc_compute(BitBlock(bits)) == crc_compute(bits)


class TestAgainstZlib:
    @pytest.mark.parametrize("data", [b"", b"\x00", b"\xff" * 3, b"123456789", bytes(range(256))])
    def test_fixed_byte_strings(self, data):
        assert crc_compute(byte_bits(data), CRC32_SPEC) == zlib.crc32(data)

    def test_random_byte_strings(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            data = rng.integers(0, 256, size=int(rng.integers(0, 200)), dtype=np.uint8).tobytes()
            assert crc_compute(byte_bits(data), CRC32_SPEC) == zlib.crc32(data)

    @given(st.binary(max_size=300))
    def test_hypothesis_byte_strings(self, data):
        assert crc_compute(byte_bits(data), CRC32_SPEC) == zlib.crc32(data)


class TestAgainstLongDivision:
    """Bit streams of any length, not just multiples of eight."""

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"width{s.width}")
    def test_random_bit_streams(self, spec):
        rng = np.random.default_rng(11)
        for _ in range(30):
            bits = rng.integers(0, 2, size=int(rng.integers(0, 130)), dtype=np.uint8)
            assert crc_compute(bits, spec) == crc_long_division(bits, spec)

    @settings(max_examples=60)
    @given(st.lists(st.integers(0, 1), max_size=200))
    def test_hypothesis_bit_streams(self, bits):
        arr = np.array(bits, dtype=np.uint8)
        for spec in ALL_SPECS:
            assert crc_compute(arr, spec) == crc_long_division(arr, spec)


class TestAffineStructure:
    """The register map is affine over GF(2): crc(a^b) = crc(a)^crc(b)^crc(0)."""

    @given(st.integers(1, 120), st.integers(0, 2**32 - 1))
    def test_xor_identity(self, length, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 2, length, dtype=np.uint8)
        b = rng.integers(0, 2, length, dtype=np.uint8)
        zero = np.zeros(length, dtype=np.uint8)
        for spec in ALL_SPECS:
            assert crc_compute(a ^ b, spec) == crc_compute(a, spec) ^ crc_compute(b, spec) ^ crc_compute(zero, spec)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"width{s.width}")
    def test_single_bit_flip_always_detected(self, spec):
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 40, dtype=np.uint8)
        base = crc_compute(bits, spec)
        for i in range(bits.size):
            flipped = bits.copy()
            flipped[i] ^= 1
            assert crc_compute(flipped, spec) != base


class TestSpecs:
    def test_spec_for_id_round_trip(self):
        for spec in ALL_SPECS:
            assert spec_for_id(spec.spec_id) is spec

    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError, match="unknown crc spec id"):
            spec_for_id(0x7F)

    def test_unsupported_width_rejected(self):
        with pytest.raises(ValueError, match="width"):
            CrcSpec(width=12, poly=0x80F, init=0, xor_out=0, spec_id=0x09)

    def test_out_of_range_poly_rejected(self):
        with pytest.raises(ValueError, match="poly"):
            CrcSpec(width=8, poly=0x131, init=0, xor_out=0, spec_id=0x09)

    def test_reflected_poly(self):
        assert CRC32_SPEC.reflected_poly == 0xEDB88320
        assert CRC16_SPEC.reflected_poly == 0xA001
        assert CRC8_SPEC.reflected_poly == 0x8C


class TestCrcToBits:
    def test_lsb_first_order(self):
        assert list(crc_to_bits(1, 8)) == [1, 0, 0, 0, 0, 0, 0, 0]
        assert list(crc_to_bits(0x80, 8)) == [0, 0, 0, 0, 0, 0, 0, 1]

    @pytest.mark.parametrize("value,width", [(0xCBF43926, 32), (0xBB3D, 16), (0xA1, 8)])
    def test_round_trip(self, value, width):
        bits = crc_to_bits(value, width)
        assert bits.shape == (width,) and bits.dtype == np.uint8
        assert int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little") == value


class TestGoldenVectors:
    """Frozen vectors generated from zlib and the long-division reference."""

    VECTORS = json.loads(GOLDEN.read_text())

    def test_byte_vectors(self):
        for entry in self.VECTORS["byte_vectors"]:
            bits = byte_bits(bytes.fromhex(entry["hex"]))
            assert crc_compute(bits, CRC32_SPEC) == entry["crc32"]
            assert crc_compute(bits, CRC16_SPEC) == entry["crc16"]
            assert crc_compute(bits, CRC8_SPEC) == entry["crc8"]

    def test_bit_vectors(self):
        for entry in self.VECTORS["bit_vectors"]:
            bits = np.array(entry["bits"], dtype=np.uint8)
            assert crc_compute(bits, CRC32_SPEC) == entry["crc32"]
            assert crc_compute(bits, CRC16_SPEC) == entry["crc16"]
            assert crc_compute(bits, CRC8_SPEC) == entry["crc8"]
