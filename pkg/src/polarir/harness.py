"""Sifted-key simulation and Monte Carlo reconciliation experiments.

``generate_pair`` synthesizes a correlated key pair: Alice's bits are
uniform, Bob's differ by i.i.d. flips at the configured error rate, and
everything is a pure function of the seed.  ``run_experiment`` sweeps
(list size, frozen-bit count) points for one strategy, running the
Alice/Bob round trip per trial and tallying ground-truth failures.

Determinism and pairing come from counter-based seeding: trial t of a
plan with seed s draws its pair from SeedSequence([s, t]) (and, for the
masking strategy, its random word from SeedSequence([s, t, 1])).  The
per-trial outcome is therefore independent of the parallelism degree,
and two plans sharing (n, qber, seed) see bit-identical error patterns
trial for trial — paired comparisons across strategies or list sizes
need no extra machinery.

Workers are threads: the decoder kernels release the GIL, so block-level
parallelism scales while each worker keeps its own decoder instance
(decoders own mutable scratch buffers and are not reentrant).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bitblock import BitBlock, FrozenVector
from .construction import DEFAULT_FIDELITY, construct_or_load
from .crc import spec_for_id
from .decoder import DecoderConfig, make_decoder
from .metrics import ReconReport, num_frozen_for_efficiency
from .strategies import (
    STRATEGIES,
    StrategyConfig,
    alice_output,
    bob_outcome,
    leaked_bits,
)

__all__ = ["SiftedPair", "ExperimentPlan", "generate_pair", "run_experiment"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SiftedPair:
    """Alice's and Bob's correlated sifted keys plus the ground truth."""

    alice: BitBlock
    bob: BitBlock
    error_pattern: BitBlock
    seed: int

    def __post_init__(self):
        if not (len(self.alice) == len(self.bob) == len(self.error_pattern)):
            raise ValueError("alice, bob, error_pattern must share a length")
        if (self.alice.bits ^ self.error_pattern.bits != self.bob.bits).any():
            raise ValueError("bob must equal alice xor error_pattern")


def generate_pair(n: int, qber: float, seed: int) -> SiftedPair:
    """Uniform Alice key and i.i.d. Bernoulli(qber) flips, seeded."""
    if not 0.0 <= qber < 0.5:
        raise ValueError(f"qber must lie in [0, 0.5), got {qber}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    alice = rng.integers(0, 2, n, dtype=np.uint8)
    errors = (rng.random(n) < qber).astype(np.uint8)
    return SiftedPair(
        alice=BitBlock(alice),
        bob=BitBlock(alice ^ errors),
        error_pattern=BitBlock(errors),
        seed=seed,
    )


@dataclass(frozen=True)
class ExperimentPlan:
    """One strategy swept over list sizes and frozen-bit settings.

    Exactly one of ``f_targets`` (efficiency targets, converted to frozen
    counts via round(f * n * H2(qber))) and ``frozen_counts`` may be set.
    ``decoder_mode`` defaults per strategy: the fast schedule for the
    all-zero-frozen strategies (fbe, bfd), the generic CRC-aided schedule
    for dd, which sends variable frozen values.
    """

    n: int
    qber: float
    strategy: str
    list_sizes: tuple[int, ...]
    trials: int
    seed: int
    f_targets: tuple[float, ...] | None = None
    frozen_counts: tuple[int, ...] | None = None
    parallelism: int = 1
    decoder_mode: str | None = None
    crc_spec_id: int = 1
    construction_method: str = "degrading_merge"
    fidelity: int = DEFAULT_FIDELITY
    cache_dir: str | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if (self.f_targets is None) == (self.frozen_counts is None):
            raise ValueError("set exactly one of f_targets and frozen_counts")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.qber < 0.5:
            raise ValueError(f"qber must lie in [0, 0.5), got {self.qber}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not self.list_sizes:
            raise ValueError("list_sizes must be nonempty")

    def resolved_frozen_counts(self) -> tuple[int, ...]:
        if self.frozen_counts is not None:
            return self.frozen_counts
        # Construction needs qber > 0; zero-noise plans still need a code,
        # so frozen counts fall back on a small reference rate.
        q = self.qber if self.qber > 0.0 else 0.02
        return tuple(
            num_frozen_for_efficiency(self.n, q, f) for f in self.f_targets
        )

    def resolved_mode(self) -> str:
        if self.decoder_mode is not None:
            return self.decoder_mode
        return "ca_scl" if self.strategy == "dd" else "fsscl"


def trial_seed(plan_seed: int, trial: int, stream: int | None = None) -> int:
    """Counter-derived 64-bit seed for one trial (or one trial substream)."""
    words = [plan_seed, trial] if stream is None else [plan_seed, trial, stream]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


class _TimedDecoder:
    """Wraps a decoder and accumulates wall time spent inside decode()."""

    def __init__(self, inner):
        self._inner = inner
        self.elapsed = 0.0

    def decode(self, llr, crc_target=None, frozen_values=None):
        t0 = time.perf_counter()
        out = self._inner.decode(llr, crc_target, frozen_values)
        self.elapsed += time.perf_counter() - t0
        return out


def run_experiment(plan: ExperimentPlan) -> tuple[ReconReport, ...]:
    """Run every (frozen count, list size) point and tally one report each."""
    # Construction depends on qber only through the channel ordering; a
    # zero-noise plan reuses the reference construction its frozen counts
    # were resolved against.
    build_q = plan.qber if plan.qber > 0.0 else 0.02
    construction = construct_or_load(
        plan.n, build_q, plan.construction_method, plan.fidelity, plan.cache_dir
    )
    crc_spec = spec_for_id(plan.crc_spec_id)
    mode = plan.resolved_mode()
    reports = []
    for nf in plan.resolved_frozen_counts():
        frozen = FrozenVector.from_positions(
            plan.n, construction.reliability_order[:nf]
        )
        for size in plan.list_sizes:
            dec_cfg = DecoderConfig(
                frozen=frozen,
                mode=mode,
                list_size=size if mode != "sc" else 1,
                crc_width=crc_spec.width,
            )
            cfg = StrategyConfig(
                strategy=plan.strategy,
                frozen=frozen,
                decoder=dec_cfg,
                crc=crc_spec,
                rng_seed=0 if plan.strategy == "bfd" else None,
            )
            reports.append(_run_point(plan, cfg))
    return tuple(reports)


def _run_point(plan: ExperimentPlan, cfg: StrategyConfig) -> ReconReport:
    workers = min(plan.parallelism, plan.trials)
    bounds = np.linspace(0, plan.trials, workers + 1).astype(int)
    chunks = [range(bounds[i], bounds[i + 1]) for i in range(workers)]
    if workers == 1:
        tallies = [_run_chunk(plan, cfg, chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(lambda c: _run_chunk(plan, cfg, c), chunks))
    failures = sum(t[0] for t in tallies)
    collisions = sum(t[1] for t in tallies)
    seconds = sum(t[2] for t in tallies)
    frozen = cfg.frozen
    return ReconReport(
        strategy=cfg.strategy,
        n=frozen.n,
        k=frozen.num_info,
        d=cfg.crc.width,
        qber=plan.qber,
        list_size=cfg.decoder.list_size,
        trials=plan.trials,
        failures=failures,
        decode_seconds_total=seconds,
        leaked_bits=leaked_bits(cfg.strategy, frozen.n, frozen.num_info, cfg.crc.width),
        crc_collisions=collisions,
    )


def _run_chunk(plan: ExperimentPlan, cfg: StrategyConfig, trials) -> tuple[int, int, float]:
    """One worker's trials with a private decoder; returns its tally."""
    decoder = _TimedDecoder(make_decoder(cfg.decoder))
    failures = 0
    collisions = 0
    qber = plan.qber if plan.qber > 0.0 else None
    for t in trials:
        pair = generate_pair(plan.n, plan.qber, trial_seed(plan.seed, t))
        trial_cfg = cfg
        if cfg.strategy == "bfd":
            trial_cfg = replace(cfg, rng_seed=trial_seed(plan.seed, t, 1))
        ao = alice_output(pair.alice, trial_cfg)
        bo = bob_outcome(
            pair.bob, ao.syndrome_payload, ao.crc_value, trial_cfg,
            decoder=decoder, qber=qber,
        )
        truly_equal = bo.key == ao.key
        if not truly_equal:
            failures += 1
            if bo.success:
                collisions += 1
                logger.warning(
                    "CRC collision: trial %d passed the check with unequal keys",
                    t,
                )
        elif not bo.success:
            # CRC rejected a correct key: impossible for a deterministic
            # checksum over equal inputs, so treat it as a hard fault.
            raise AssertionError("CRC rejected equal keys")
    return failures, collisions, decoder.elapsed
