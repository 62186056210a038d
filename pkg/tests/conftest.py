import numpy as np
import pytest

from polarir import (
    CRC32_SPEC,
    BitBlock,
    DecoderConfig,
    FrozenVector,
    StrategyConfig,
    construct_bsc,
)

GOLDEN_QBER = 0.02


@pytest.fixture(scope="session")
def construction_1024():
    return construct_bsc(1024, GOLDEN_QBER, "degrading_merge", 64)


@pytest.fixture(scope="session")
def frozen_1024(construction_1024):
    # f = 1.45 at qber 0.02: the small-block operating point where list
    # decoding succeeds often enough for round-trip oriented tests.
    return FrozenVector.from_positions(1024, construction_1024.reliability_order[:210])


def random_block(n: int, rng: np.random.Generator) -> BitBlock:
    return BitBlock(rng.integers(0, 2, n, dtype=np.uint8))


def strategy_config(
    strategy: str,
    frozen: FrozenVector,
    mode: str = "ca_scl",
    list_size: int = 8,
    rng_seed: int | None = None,
) -> StrategyConfig:
    return StrategyConfig(
        strategy=strategy,
        frozen=frozen,
        decoder=DecoderConfig(frozen=frozen, mode=mode, list_size=list_size),
        crc=CRC32_SPEC,
        rng_seed=rng_seed,
    )
