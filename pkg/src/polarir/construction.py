"""BSC code construction: per-channel reliability bounds and frozen sets.

Two methods are provided.  "bhattacharyya" tracks the Bhattacharyya
parameter through the channel transforms (Z0 = 2*sqrt(q*(1-q)), then
Z -> 2Z - Z^2 for the check direction and Z -> Z^2 for the bit direction).
"degrading_merge" tracks a full quantized channel through the same
transforms, re-merging the output alphabet down to a fidelity cap after
every step so the recorded error probabilities are true upper bounds.

Channel index convention: bit i of the index, MSB first, selects the
transform applied at tree depth i (0 = check, 1 = bit), matching the
decoder recursion, so index 0 is the all-check synthetic channel and
index n-1 the all-bit one.

Constructions serialize to a small cache file (magic "PCIR") so large
blocks are built once; loading validates magic, version and checksum.
"""

from __future__ import annotations

import os
import struct
import tempfile
import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .bitblock import FrozenVector

__all__ = [
    "CodeConstruction",
    "CacheError",
    "construct_bsc",
    "save_cache",
    "load_cache",
    "cache_path",
    "construct_or_load",
]

_MAGIC = b"PCIR"
_VERSION = 1
_METHOD_BYTES = {"degrading_merge": 0x01, "bhattacharyya": 0x02}
_METHOD_NAMES = {v: k for k, v in _METHOD_BYTES.items()}
DEFAULT_FIDELITY = 64


class CacheError(Exception):
    """Raised when a construction cache file is malformed."""


def _validate_block_length(n: int) -> None:
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"block length must be a power of two >= 2, got {n}")


def _validate_qber(qber: float) -> None:
    if not 0.0 < qber < 0.5:
        raise ValueError(f"qber must lie in (0, 0.5), got {qber}")


@dataclass(frozen=True)
class CodeConstruction:
    """Reliability profile of the n synthetic channels of one BSC code."""

    n: int
    qber: float
    method: str
    fidelity: int
    reliability_order: np.ndarray = field(repr=False)  # least reliable first
    upper_bounds: np.ndarray = field(repr=False)  # per-channel error bound

    def frozen_vector(self, num_frozen: int) -> FrozenVector:
        """Mask freezing the num_frozen least reliable channels."""
        if not 0 < num_frozen < self.n:
            raise ValueError(f"num_frozen must satisfy 0 < k < n, got {num_frozen}")
        return FrozenVector.from_positions(self.n, self.reliability_order[:num_frozen])

    def serialize(self) -> bytes:
        qber_fixed = int(round(self.qber * 1_000_000))
        head = _MAGIC + struct.pack(
            ">BIIBH",
            _VERSION,
            self.n,
            qber_fixed,
            _METHOD_BYTES[self.method],
            self.fidelity,
        )
        body = (
            self.reliability_order.astype(">u4").tobytes()
            + self.upper_bounds.astype(">f8").tobytes()
        )
        payload = head + body
        return payload + struct.pack(">I", zlib.crc32(payload) & 0xFFFFFFFF)


def _reliability_order(upper_bounds: np.ndarray) -> np.ndarray:
    # Least reliable (largest bound) first; equal bounds by ascending index.
    n = upper_bounds.size
    return np.lexsort((np.arange(n), -upper_bounds)).astype(np.int64)


def _bhattacharyya_bounds(n: int, qber: float) -> np.ndarray:
    z = np.array([2.0 * np.sqrt(qber * (1.0 - qber))], dtype=np.float64)
    while z.size < n:
        nxt = np.empty(z.size * 2, dtype=np.float64)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


# ---------------------------------------------------------------------------
# Degrading merge.  A channel is a list of output-symbol pairs (a_i, b_i)
# with a_i >= b_i: the pair stands for a symbol y with P(y|0)=a, P(y|1)=b
# and its conjugate with the roles swapped.  sum(a+b) == 1.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _sym_capacity_term(a: float, b: float) -> float:
    s = a + b
    if s <= 0.0:
        return 0.0
    t = 0.0
    if a > 0.0:
        t += a * np.log2(2.0 * a / s)
    if b > 0.0:
        t += b * np.log2(2.0 * b / s)
    return t


@njit(cache=True, nogil=True)
def _merge_loss(a1: float, b1: float, a2: float, b2: float) -> float:
    loss = (
        _sym_capacity_term(a1, b1)
        + _sym_capacity_term(a2, b2)
        - _sym_capacity_term(a1 + a2, b1 + b2)
    )
    return loss if loss > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _heap_swap(hloss, hi, hj, hvi, hvj, x, y):
    hloss[x], hloss[y] = hloss[y], hloss[x]
    hi[x], hi[y] = hi[y], hi[x]
    hj[x], hj[y] = hj[y], hj[x]
    hvi[x], hvi[y] = hvi[y], hvi[x]
    hvj[x], hvj[y] = hvj[y], hvj[x]


@njit(cache=True, nogil=True)
def _heap_push(hloss, hi, hj, hvi, hvj, size, loss, i, j, vi, vj):
    pos = size
    hloss[pos] = loss
    hi[pos] = i
    hj[pos] = j
    hvi[pos] = vi
    hvj[pos] = vj
    while pos > 0:
        parent = (pos - 1) >> 1
        if hloss[parent] <= hloss[pos]:
            break
        _heap_swap(hloss, hi, hj, hvi, hvj, parent, pos)
        pos = parent
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hloss, hi, hj, hvi, hvj, size):
    size -= 1
    _heap_swap(hloss, hi, hj, hvi, hvj, 0, size)
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and hloss[right] < hloss[left]:
            child = right
        if hloss[pos] <= hloss[child]:
            break
        _heap_swap(hloss, hi, hj, hvi, hvj, pos, child)
        pos = child
    return size


@njit(cache=True, nogil=True)
def _degrade_to_cap(pa, pb, k, cap, sa, sb, nxt, prv, ver, hloss, hi, hj, hvi, hvj):
    """Merge the k pairs in pa/pb down to at most cap pairs, in place."""
    if k <= cap:
        return k
    # Sort by likelihood ratio, descending; infinite ratios first.
    key = np.empty(k, dtype=np.float64)
    for i in range(k):
        key[i] = -1e308 * (1.0 + pa[i]) if pb[i] == 0.0 else -pa[i] / pb[i]
    order = np.argsort(key)
    for s in range(k):
        sa[s] = pa[order[s]]
        sb[s] = pb[order[s]]
    for s in range(k):
        pa[s] = sa[s]
        pb[s] = sb[s]
        nxt[s] = s + 1
        prv[s] = s - 1
        ver[s] = 0
    size = 0
    for s in range(k - 1):
        size = _heap_push(
            hloss, hi, hj, hvi, hvj, size,
            _merge_loss(pa[s], pb[s], pa[s + 1], pb[s + 1]), s, s + 1, 0, 0,
        )
    alive = k
    while alive > cap:
        i = -1
        j = -1
        while size > 0:
            ci = hi[0]
            cj = hj[0]
            cvi = hvi[0]
            cvj = hvj[0]
            size = _heap_pop(hloss, hi, hj, hvi, hvj, size)
            if ver[ci] == cvi and ver[cj] == cvj and nxt[ci] == cj:
                i = ci
                j = cj
                break
        if i < 0:
            break  # no mergeable edge left (cannot happen for k > 1)
        pa[i] += pa[j]
        pb[i] += pb[j]
        ver[i] += 1
        ver[j] += 1
        nj = nxt[j]
        nxt[i] = nj
        if nj < k:
            prv[nj] = i
        alive -= 1
        pi = prv[i]
        if pi >= 0:
            size = _heap_push(
                hloss, hi, hj, hvi, hvj, size,
                _merge_loss(pa[pi], pb[pi], pa[i], pb[i]), pi, i, ver[pi], ver[i],
            )
        if nj < k:
            size = _heap_push(
                hloss, hi, hj, hvi, hvj, size,
                _merge_loss(pa[i], pb[i], pa[nj], pb[nj]), i, nj, ver[i], ver[nj],
            )
    # Compact the surviving pairs to the front.
    out = 0
    s = 0
    while s < k:
        sa[out] = pa[s]
        sb[out] = pb[s]
        out += 1
        s = nxt[s]
    for s in range(out):
        pa[s] = sa[s]
        pb[s] = sb[s]
    return out


@njit(cache=True, nogil=True)
def _check_transform(pa, pb, k, oa, ob):
    out = 0
    for i in range(k):
        for j in range(i, k):
            w = 2.0 if j == i else 4.0
            s = 0.5 * (pa[i] * pa[j] + pb[i] * pb[j])
            t = 0.5 * (pa[i] * pb[j] + pb[i] * pa[j])
            oa[out] = w * s
            ob[out] = w * t
            out += 1
    return out


@njit(cache=True, nogil=True)
def _bit_transform(pa, pb, k, oa, ob):
    out = 0
    for i in range(k):
        for j in range(i, k):
            w = 1.0 if j == i else 2.0
            oa[out] = w * pa[i] * pa[j]
            ob[out] = w * pb[i] * pb[j]
            out += 1
            x = pb[i] * pa[j]
            y = pa[i] * pb[j]
            hi_v = x if x >= y else y
            lo_v = y if x >= y else x
            oa[out] = w * hi_v
            ob[out] = w * lo_v
            out += 1
    return out


@njit(cache=True, nogil=True)
def _degrading_merge_bounds(m: int, qber: float, cap: int) -> np.ndarray:
    n = 1 << m
    max_pairs = cap * (cap + 1)  # bit transform worst case from <= cap pairs
    # Per-depth channel state along the current root-to-leaf path.
    ch_a = np.zeros((m + 1, cap), dtype=np.float64)
    ch_b = np.zeros((m + 1, cap), dtype=np.float64)
    ch_k = np.zeros(m + 1, dtype=np.int64)
    ch_a[0, 0] = 1.0 - qber
    ch_b[0, 0] = qber
    ch_k[0] = 1
    # Scratch shared by transform and merge steps.
    ta = np.empty(max_pairs, dtype=np.float64)
    tb = np.empty(max_pairs, dtype=np.float64)
    sa = np.empty(max_pairs, dtype=np.float64)
    sb = np.empty(max_pairs, dtype=np.float64)
    nxt = np.empty(max_pairs, dtype=np.int64)
    prv = np.empty(max_pairs, dtype=np.int64)
    ver = np.empty(max_pairs, dtype=np.int64)
    heap_cap = 4 * max_pairs
    hloss = np.empty(heap_cap, dtype=np.float64)
    hi = np.empty(heap_cap, dtype=np.int64)
    hj = np.empty(heap_cap, dtype=np.int64)
    hvi = np.empty(heap_cap, dtype=np.int64)
    hvj = np.empty(heap_cap, dtype=np.int64)

    bounds = np.empty(n, dtype=np.float64)
    for leaf in range(n):
        if leaf == 0:
            start = 1
        else:
            tz = 0
            x = leaf
            while x & 1 == 0:
                tz += 1
                x >>= 1
            start = m - tz
        for d in range(start, m + 1):
            bit = (leaf >> (m - d)) & 1
            k_in = ch_k[d - 1]
            if bit == 0:
                k_t = _check_transform(ch_a[d - 1], ch_b[d - 1], k_in, ta, tb)
            else:
                k_t = _bit_transform(ch_a[d - 1], ch_b[d - 1], k_in, ta, tb)
            k_t = _degrade_to_cap(ta, tb, k_t, cap, sa, sb, nxt, prv, ver, hloss, hi, hj, hvi, hvj)
            for s in range(k_t):
                ch_a[d, s] = ta[s]
                ch_b[d, s] = tb[s]
            ch_k[d] = k_t
        pe = 0.0
        for s in range(ch_k[m]):
            pe += ch_b[m, s] if ch_b[m, s] <= ch_a[m, s] else ch_a[m, s]
        bounds[leaf] = pe
    return bounds


def construct_bsc(
    n: int,
    qber: float,
    method: str = "degrading_merge",
    fidelity: int = DEFAULT_FIDELITY,
) -> CodeConstruction:
    """Build the reliability profile of the n synthetic channels.

    Parameters
    ----------
    n : int
        Block length, a power of two.
    qber : float
        Crossover probability of the binary symmetric channel, in (0, 0.5).
    method : str
        "degrading_merge" (default) or "bhattacharyya".
    fidelity : int
        Output-alphabet cap for degrading_merge (symbols, even, >= 4).
        Recorded as 0 for bhattacharyya, which has no such knob.
    """
    _validate_block_length(n)
    _validate_qber(qber)
    if method == "bhattacharyya":
        bounds = _bhattacharyya_bounds(n, qber)
        fidelity = 0
    elif method == "degrading_merge":
        if fidelity < 4 or fidelity % 2 != 0:
            raise ValueError(f"fidelity must be an even integer >= 4, got {fidelity}")
        m = n.bit_length() - 1
        bounds = _degrading_merge_bounds(m, float(qber), fidelity // 2)
    else:
        raise ValueError(f"unknown construction method {method!r}")
    bounds.setflags(write=False)
    order = _reliability_order(bounds)
    order.setflags(write=False)
    return CodeConstruction(
        n=n,
        qber=float(qber),
        method=method,
        fidelity=int(fidelity),
        reliability_order=order,
        upper_bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Cache files.
# ---------------------------------------------------------------------------


def cache_path(cache_dir: str, n: int, qber: float, method: str, fidelity: int) -> str:
    if method == "bhattacharyya":
        fidelity = 0
    qber_fixed = int(round(qber * 1_000_000))
    name = f"pcir_n{n}_q{qber_fixed}_{method}_mu{fidelity}.pcc"
    return os.path.join(cache_dir, name)


def save_cache(construction: CodeConstruction, path: str) -> None:
    """Write the construction atomically (temp file then rename)."""
    data = construction.serialize()
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cache(path: str) -> CodeConstruction:
    with open(path, "rb") as fh:
        data = fh.read()
    head_len = len(_MAGIC) + struct.calcsize(">BIIBH")
    if len(data) < head_len + 4:
        raise CacheError("cache file truncated")
    if data[: len(_MAGIC)] != _MAGIC:
        raise CacheError("bad magic")
    (stored_crc,) = struct.unpack(">I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CacheError("checksum mismatch")
    version, n, qber_fixed, method_byte, fidelity = struct.unpack(
        ">BIIBH", data[len(_MAGIC) : head_len]
    )
    if version != _VERSION:
        raise CacheError(f"unsupported cache version {version}")
    if method_byte not in _METHOD_NAMES:
        raise CacheError(f"unknown method byte {method_byte:#04x}")
    body = data[head_len:-4]
    expect = n * 4 + n * 8
    if len(body) != expect:
        raise CacheError(f"body length {len(body)}, expected {expect}")
    order = np.frombuffer(body[: n * 4], dtype=">u4").astype(np.int64)
    bounds = np.frombuffer(body[n * 4 :], dtype=">f8").astype(np.float64)
    if not np.array_equal(np.sort(order), np.arange(n)):
        raise CacheError("reliability_order is not a permutation")
    order.setflags(write=False)
    bounds.setflags(write=False)
    return CodeConstruction(
        n=int(n),
        qber=qber_fixed / 1_000_000,
        method=_METHOD_NAMES[method_byte],
        fidelity=int(fidelity),
        reliability_order=order,
        upper_bounds=bounds,
    )


def construct_or_load(
    n: int,
    qber: float,
    method: str = "degrading_merge",
    fidelity: int = DEFAULT_FIDELITY,
    cache_dir: str | None = None,
) -> CodeConstruction:
    """Load from the cache directory when possible, else build and cache.

    Building degrading-merge tables for large n takes real time, so a miss
    is worth a warning: callers that expected a prebuilt cache learn they
    are paying for construction on the fly.
    """
    if cache_dir is None:
        warnings.warn(
            f"no construction cache directory set; building n={n} on the fly",
            stacklevel=2,
        )
        return construct_bsc(n, qber, method, fidelity)
    path = cache_path(cache_dir, n, qber, method, fidelity)
    if os.path.exists(path):
        return load_cache(path)
    warnings.warn(
        f"construction cache miss at {path}; building n={n} on the fly",
        stacklevel=2,
    )
    built = construct_bsc(n, qber, method, fidelity)
    save_cache(built, path)
    return built
