"""Polar-code information reconciliation for QKD-style sifted keys.

The package covers the full pipeline: BSC code construction, polar
transform, SC/SCL/CRC-aided list decoding with a fast pruned variant,
three reconciliation strategies (frozen-bits-erasure, direct-decoding,
and block-forwarding baselines), a Monte Carlo harness, a two-party wire
protocol, and a command-line front end.
"""

from .bitblock import BitBlock, FrozenVector, extract, fill, mask_and, xor
from .construction import (
    DEFAULT_FIDELITY,
    CacheError,
    CodeConstruction,
    cache_path,
    construct_bsc,
    construct_or_load,
    load_cache,
    save_cache,
)
from .crc import CRC8_SPEC, CRC16_SPEC, CRC32_SPEC, CrcSpec, crc_compute, crc_to_bits, spec_for_id
from .decoder import (
    LLR_CLAMP,
    DecodeOutcome,
    DecoderConfig,
    ListDecoder,
    ScDecoder,
    fsscl_decode,
    llr_from_bsc,
    make_decoder,
    sc_decode,
    scl_decode,
)
from .harness import ExperimentPlan, SiftedPair, generate_pair, run_experiment
from .metrics import (
    FailureRate,
    ReconReport,
    binary_entropy,
    efficiency,
    efficiency_from_leak,
    failure_rate,
    num_frozen_for_efficiency,
    reconciliation_yield,
    throughput,
)
from .strategies import (
    STRATEGIES,
    AliceOutput,
    BobOutcome,
    StrategyConfig,
    alice_output,
    bfd_alice,
    bfd_bob,
    bob_outcome,
    dd_alice,
    dd_bob,
    fbe_alice,
    fbe_bob,
    leaked_bits,
)
from .transform import TransformParams, bit_reverse_permute, encode
from .transport import (
    SessionState,
    TransportError,
    alice_session,
    bob_session,
    construction_hash,
    framing_overhead_bits,
    pack_syndrome,
    unpack_syndrome,
)

__version__ = "0.1.0"

__all__ = [
    "BitBlock",
    "FrozenVector",
    "extract",
    "fill",
    "mask_and",
    "xor",
    "DEFAULT_FIDELITY",
    "CacheError",
    "CodeConstruction",
    "cache_path",
    "construct_bsc",
    "construct_or_load",
    "load_cache",
    "save_cache",
    "CRC8_SPEC",
    "CRC16_SPEC",
    "CRC32_SPEC",
    "CrcSpec",
    "crc_compute",
    "crc_to_bits",
    "spec_for_id",
    "LLR_CLAMP",
    "DecodeOutcome",
    "DecoderConfig",
    "ListDecoder",
    "ScDecoder",
    "fsscl_decode",
    "llr_from_bsc",
    "make_decoder",
    "sc_decode",
    "scl_decode",
    "ExperimentPlan",
    "SiftedPair",
    "generate_pair",
    "run_experiment",
    "FailureRate",
    "ReconReport",
    "binary_entropy",
    "efficiency",
    "efficiency_from_leak",
    "failure_rate",
    "num_frozen_for_efficiency",
    "reconciliation_yield",
    "throughput",
    "STRATEGIES",
    "AliceOutput",
    "BobOutcome",
    "StrategyConfig",
    "alice_output",
    "bfd_alice",
    "bfd_bob",
    "bob_outcome",
    "dd_alice",
    "dd_bob",
    "fbe_alice",
    "fbe_bob",
    "leaked_bits",
    "TransformParams",
    "bit_reverse_permute",
    "encode",
    "SessionState",
    "TransportError",
    "alice_session",
    "bob_session",
    "construction_hash",
    "framing_overhead_bits",
    "pack_syndrome",
    "unpack_syndrome",
    "__version__",
]
