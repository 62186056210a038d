"""Reconciliation figures of merit.

Efficiency counts every classical bit revealed for a block against the
Shannon limit n*H2(qber); the secret-key yield per sifted bit follows as
(1 - eps) * (1 - f * H2(qber)) where eps is the frame failure rate.
Failure rates carry exact (Clopper-Pearson) 95% binomial intervals since
the interesting regimes see a handful of failures in thousands of trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import beta

__all__ = [
    "binary_entropy",
    "efficiency",
    "efficiency_from_leak",
    "reconciliation_yield",
    "failure_rate",
    "FailureRate",
    "ReconReport",
    "throughput",
    "num_frozen_for_efficiency",
]


def binary_entropy(x: float) -> float:
    """H2(x) in bits; defined as 0 at the endpoints."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def efficiency_from_leak(leaked_bits: int, n: int, qber: float) -> float:
    """f = leaked bits / (n * H2(qber))."""
    if leaked_bits < 0:
        raise ValueError(f"leaked_bits must be nonnegative, got {leaked_bits}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return leaked_bits / (n * binary_entropy(qber))


def efficiency(n: int, k: int, d: int, qber: float, include_crc: bool = False) -> float:
    """Efficiency of a syndrome-style disclosure of n-k bits plus a d-bit check."""
    if not 0 < k < n:
        raise ValueError(f"k must satisfy 0 < k < n, got k={k}, n={n}")
    leaked = (n - k) + (d if include_crc else 0)
    return efficiency_from_leak(leaked, n, qber)


def reconciliation_yield(f: float, eps: float, qber: float) -> float:
    """Secret fraction per sifted bit: (1 - eps) * (1 - f * H2(qber)).

    Named with a prefix because bare "yield" is reserved in Python.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return (1.0 - eps) * (1.0 - f * binary_entropy(qber))


@dataclass(frozen=True)
class FailureRate:
    point: float
    ci_low: float
    ci_high: float
    failures: int
    trials: int


def failure_rate(failures: int, trials: int, confidence: float = 0.95) -> FailureRate:
    """Point estimate with an exact two-sided binomial interval."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not 0 <= failures <= trials:
        raise ValueError(f"failures must lie in [0, trials], got {failures}/{trials}")
    alpha = 1.0 - confidence
    if failures == 0:
        low = 0.0
    else:
        low = float(beta.ppf(alpha / 2.0, failures, trials - failures + 1))
    if failures == trials:
        high = 1.0
    else:
        high = float(beta.ppf(1.0 - alpha / 2.0, failures + 1, trials - failures))
    return FailureRate(
        point=failures / trials,
        ci_low=low,
        ci_high=high,
        failures=failures,
        trials=trials,
    )


def throughput(sifted_bits: int, decode_seconds: float) -> float:
    """Reconciled sifted bits per second of decode time."""
    if decode_seconds <= 0.0:
        raise ValueError(f"decode_seconds must be positive, got {decode_seconds}")
    return sifted_bits / decode_seconds


@dataclass(frozen=True)
class ReconReport:
    """Tally for one experiment point: a strategy at fixed (n, k, L, qber).

    ``failures`` counts ground-truth key mismatches (a CRC collision that
    slips a wrong key through still counts as a failure here, and the
    collision itself is reported separately in ``crc_collisions``).
    ``decode_seconds_total`` accumulates Bob-side decoder time only.
    """

    strategy: str
    n: int
    k: int
    d: int
    qber: float
    list_size: int
    trials: int
    failures: int
    decode_seconds_total: float
    leaked_bits: int
    crc_collisions: int = 0

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("need 0 <= failures <= trials")
        if self.crc_collisions > self.failures:
            raise ValueError("collisions are a subset of failures")

    @property
    def decode_seconds_per_block(self) -> float:
        return self.decode_seconds_total / self.trials

    @property
    def failure_rate(self) -> FailureRate:
        return failure_rate(self.failures, self.trials)

    def efficiency(self, include_crc: bool = False) -> float:
        leak = self.leaked_bits if include_crc else self.leaked_bits - self.d
        return efficiency_from_leak(leak, self.n, self.qber)

    @property
    def throughput_bps(self) -> float:
        return throughput(self.n * self.trials, self.decode_seconds_total)


def num_frozen_for_efficiency(n: int, qber: float, f_target: float) -> int:
    """Frozen-bit count whose disclosure matches a target efficiency.

    round(f * n * H2(qber)), clamped to the valid open interval (0, n).
    """
    if f_target <= 0.0:
        raise ValueError(f"f_target must be positive, got {f_target}")
    raw = int(round(f_target * n * binary_entropy(qber)))
    return min(max(raw, 1), n - 1)
