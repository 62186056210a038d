"""Operator command surface.

Four subcommands cover the toolkit's workflows, plus one convenience:

* ``construct`` builds a code construction and caches it (idempotent).
* ``simulate`` runs Monte Carlo sweeps and emits metric rows as CSV or
  JSON lines.
* ``reconcile`` runs one live two-party session over a local socket,
  reading a sifted key file and writing the reconciled key on success.
* ``bench`` times Bob-side decoding over warm runs and compares the
  generic and pruned list schedules on identical inputs.
* ``genpair`` writes a correlated sifted-key file pair for two-process
  reconcile runs.

Key files are raw packed bits (LSB-first within each byte) behind an
8-byte big-endian bit-count header.

Exit statuses: 0 success; 2 usage or validation error; 3 reconciliation
failed (CRC rejected the block); transport aborts exit with their abort
code (16 hash mismatch, 17 frame parse, 18 phase violation, 19 EOF).

The construction cache directory resolves from --cache-dir, then the
POLARIR_CACHE_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import socket
import sys
import time

import numpy as np

from .bitblock import BitBlock, FrozenVector, fill, xor
from .construction import (
    DEFAULT_FIDELITY,
    CacheError,
    cache_path,
    construct_bsc,
    construct_or_load,
    load_cache,
    save_cache,
)
from .crc import spec_for_id
from .decoder import DecoderConfig, llr_from_bsc, make_decoder
from .harness import ExperimentPlan, generate_pair, run_experiment, trial_seed
from .metrics import ReconReport, num_frozen_for_efficiency, reconciliation_yield
from .strategies import STRATEGIES, StrategyConfig, alice_output
from .transform import encode
from .transport import (
    TransportError,
    alice_session,
    bob_session,
    pack_syndrome,
    unpack_syndrome,
)

__all__ = ["main", "build_parser", "read_key_file", "write_key_file"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RECONCILE_FAILED = 3

CSV_COLUMNS = (
    "strategy", "n", "k", "d", "qber", "L", "trials", "failures",
    "eps_point", "eps_ci_low", "eps_ci_high", "f_excl_crc", "f_incl_crc",
    "yield", "decode_seconds_total", "throughput_bps",
)

BENCH_COLUMNS = (
    "mode", "n", "k", "L", "trials", "decode_seconds_total", "throughput_bps",
)


def write_key_file(path: str, block: BitBlock) -> None:
    with open(path, "wb") as fh:
        fh.write(len(block).to_bytes(8, "big"))
        fh.write(pack_syndrome(block))


def read_key_file(path: str) -> BitBlock:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated header")
        bits = int.from_bytes(header, "big")
        data = fh.read()
    try:
        return unpack_syndrome(data, bits)
    except TransportError as e:
        raise ValueError(f"{path}: {e}") from None


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="block length (power of two)")
    p.add_argument("--qber", type=float, required=True, help="channel error rate")
    p.add_argument("--cache-dir", default=os.environ.get("POLARIR_CACHE_DIR"),
                   help="construction cache directory (env POLARIR_CACHE_DIR)")


def _add_code_point(p: argparse.ArgumentParser, multi: bool) -> None:
    conv_f = _float_list if multi else float
    conv_k = _int_list if multi else int
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--f-target", type=conv_f,
                       help="efficiency target(s); sets the frozen count")
    group.add_argument("--num-frozen", type=conv_k,
                       help="explicit frozen-bit count(s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarir",
        description="Polar-code information reconciliation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build and cache a code construction")
    _add_common(p)
    p.add_argument("--method", choices=("degrading_merge", "bhattacharyya"),
                   default="degrading_merge")
    p.add_argument("--fidelity", type=int, default=DEFAULT_FIDELITY)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="Monte Carlo sweep, metric rows out")
    _add_common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="fbe")
    p.add_argument("--list-size", type=_int_list, default=(16,),
                   help="comma-separated list-size sweep")
    _add_code_point(p, multi=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--decoder-mode", choices=("sc", "scl", "ca_scl", "fsscl"),
                   default=None, help="override the per-strategy default")
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconcile", help="two-party session over a socket")
    _add_common(p)
    p.add_argument("--role", choices=("alice", "bob"), required=True)
    conn = p.add_mutually_exclusive_group(required=True)
    conn.add_argument("--listen", help="host:port to accept one session on")
    conn.add_argument("--connect", help="host:port to dial")
    p.add_argument("--strategy", choices=STRATEGIES, default="fbe")
    p.add_argument("--list-size", type=int, default=16)
    _add_code_point(p, multi=False)
    p.add_argument("--seed", type=int, default=0,
                   help="random-word seed (bfd only)")
    p.add_argument("--decoder-mode", choices=("sc", "scl", "ca_scl", "fsscl"),
                   default=None)
    p.add_argument("--key-in", required=True, help="sifted key file")
    p.add_argument("--out", help="reconciled key file (written on success)")
    p.set_defaults(func=cmd_reconcile)

    p = sub.add_parser("bench", help="Bob-side decode throughput per (mode, L)")
    _add_common(p)
    p.add_argument("--list-size", type=_int_list, default=(1, 2, 8, 16))
    _add_code_point(p, multi=False)
    p.add_argument("--trials", type=int, default=20,
                   help="timed decodes per (mode, L)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("genpair", help="write correlated sifted key files")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="prefix; writes <prefix>.alice.key and <prefix>.bob.key")
    p.set_defaults(func=cmd_genpair)

    return parser


def cmd_construct(args) -> int:
    if args.cache_dir is None:
        raise ValueError("construct needs --cache-dir or POLARIR_CACHE_DIR")
    path = cache_path(args.cache_dir, args.n, args.qber, args.method, args.fidelity)
    if os.path.exists(path):
        load_cache(path)  # verify checksum before claiming the hit
        print(f"cache hit: {path}")
        return EXIT_OK
    built = construct_bsc(args.n, args.qber, args.method, args.fidelity)
    save_cache(built, path)
    print(f"built: {path}")
    return EXIT_OK


def _report_row(r: ReconReport) -> dict:
    eps = r.failure_rate
    if r.qber > 0.0:
        f_excl = r.efficiency(include_crc=False)
        f_incl = r.efficiency(include_crc=True)
        y = reconciliation_yield(f_excl, eps.point, r.qber)
    else:
        # Efficiency divides by H2(qber); at zero noise the ratio is
        # undefined, so the derived columns go out as NaN/null.
        f_excl = f_incl = y = math.nan
    return {
        "strategy": r.strategy, "n": r.n, "k": r.k, "d": r.d, "qber": r.qber,
        "L": r.list_size, "trials": r.trials, "failures": r.failures,
        "eps_point": eps.point, "eps_ci_low": eps.ci_low,
        "eps_ci_high": eps.ci_high, "f_excl_crc": f_excl, "f_incl_crc": f_incl,
        "yield": y, "decode_seconds_total": r.decode_seconds_total,
        "throughput_bps": r.throughput_bps,
    }


def _emit_rows(rows, columns, fmt: str, out_path: str | None) -> None:
    def render(fh):
        if fmt == "csv":
            writer = csv.DictWriter(fh, fieldnames=list(columns))
            writer.writeheader()
            writer.writerows(rows)
        else:
            for row in rows:
                clean = {k: (None if isinstance(v, float) and math.isnan(v) else v)
                         for k, v in row.items()}
                fh.write(json.dumps(clean) + "\n")

    if out_path:
        with open(out_path, "w", newline="") as fh:
            render(fh)
    else:
        render(sys.stdout)


def cmd_simulate(args) -> int:
    plan = ExperimentPlan(
        n=args.n,
        qber=args.qber,
        strategy=args.strategy,
        list_sizes=args.list_size,
        trials=args.trials,
        seed=args.seed,
        f_targets=args.f_target,
        frozen_counts=args.num_frozen,
        parallelism=args.threads,
        decoder_mode=args.decoder_mode,
        cache_dir=args.cache_dir,
    )
    reports = run_experiment(plan)
    _emit_rows([_report_row(r) for r in reports], CSV_COLUMNS, args.format, args.out)
    return EXIT_OK


def _session_config(args) -> StrategyConfig:
    construction = construct_or_load(
        args.n, args.qber if args.qber > 0 else 0.02, cache_dir=args.cache_dir
    )
    nf = args.num_frozen
    if nf is None:
        q = args.qber if args.qber > 0 else 0.02
        nf = num_frozen_for_efficiency(args.n, q, args.f_target)
    frozen = FrozenVector.from_positions(args.n, construction.reliability_order[:nf])
    mode = args.decoder_mode
    if mode is None:
        mode = "ca_scl" if args.strategy == "dd" else "fsscl"
    crc = spec_for_id(1)
    return StrategyConfig(
        strategy=args.strategy,
        frozen=frozen,
        decoder=DecoderConfig(
            frozen=frozen,
            mode=mode,
            list_size=args.list_size if mode != "sc" else 1,
            crc_width=crc.width,
        ),
        crc=crc,
        rng_seed=args.seed if args.strategy == "bfd" else None,
    )


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {text!r}")
    return host, int(port)


def _open_socket(args) -> socket.socket:
    if args.listen:
        host, port = _parse_addr(args.listen)
        with socket.create_server((host, port)) as server:
            conn, _ = server.accept()
            return conn
    host, port = _parse_addr(args.connect)
    deadline = time.monotonic() + 30.0
    while True:
        try:
            return socket.create_connection((host, port))
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.1)


def cmd_reconcile(args) -> int:
    cfg = _session_config(args)
    k_sifted = read_key_file(args.key_in)
    if len(k_sifted) != args.n:
        raise ValueError(
            f"{args.key_in} holds {len(k_sifted)} bits, expected n={args.n}"
        )
    conn = _open_socket(args)
    try:
        stream = conn.makefile("rwb")
        try:
            if args.role == "alice":
                report = alice_session(stream, k_sifted, cfg, qber=args.qber)
                success = report.failures == 0
                key = alice_output(k_sifted, cfg).key if success else None
            else:
                outcome = bob_session(
                    stream, k_sifted, cfg, qber=args.qber if args.qber > 0 else None
                )
                success = outcome.success
                key = outcome.key if success else None
        finally:
            stream.close()
    finally:
        conn.close()
    if not success:
        print("reconciliation failed: CRC rejected the block", file=sys.stderr)
        return EXIT_RECONCILE_FAILED
    if args.out:
        write_key_file(args.out, key)
    print(f"reconciled {len(key)} key bits")
    return EXIT_OK


def cmd_bench(args) -> int:
    construction = construct_or_load(
        args.n, args.qber, cache_dir=args.cache_dir
    )
    nf = args.num_frozen
    if nf is None:
        nf = num_frozen_for_efficiency(args.n, args.qber, args.f_target)
    frozen = FrozenVector.from_positions(args.n, construction.reliability_order[:nf])
    crc = spec_for_id(1)

    # Identical Bob-side inputs for every (mode, L): pregenerated noisy
    # blocks and Alice-side CRC targets, built outside the timed region.
    blocks = []
    for t in range(args.trials):
        pair = generate_pair(args.n, args.qber, trial_seed(args.seed, t))
        cfg = StrategyConfig(
            strategy="fbe",
            frozen=frozen,
            decoder=DecoderConfig(frozen=frozen, mode="ca_scl",
                                  list_size=1, crc_width=crc.width),
            crc=crc,
        )
        ao = alice_output(pair.alice, cfg)
        w = fill(BitBlock.zeros(args.n), frozen.mask, ao.syndrome_payload)
        x_prime = xor(pair.bob, encode(w))
        blocks.append((llr_from_bsc(x_prime, args.qber), ao.crc_value))

    rows = []
    for mode in ("scl", "fsscl"):
        for size in args.list_size:
            dec = make_decoder(DecoderConfig(
                frozen=frozen, mode=mode, list_size=size, crc_width=crc.width
            ))
            for llr, target in blocks[: min(2, len(blocks))]:
                dec.decode(llr, crc_target=target)  # warm the kernels
            t0 = time.perf_counter()
            for llr, target in blocks:
                dec.decode(llr, crc_target=target)
            elapsed = time.perf_counter() - t0
            rows.append({
                "mode": mode, "n": args.n, "k": args.n - nf, "L": size,
                "trials": args.trials, "decode_seconds_total": elapsed,
                "throughput_bps": args.n * args.trials / elapsed,
            })
    _emit_rows(rows, BENCH_COLUMNS, args.format, args.out)
    return EXIT_OK


def cmd_genpair(args) -> int:
    pair = generate_pair(args.n, args.qber, args.seed)
    write_key_file(f"{args.out}.alice.key", pair.alice)
    write_key_file(f"{args.out}.bob.key", pair.bob)
    print(f"wrote {args.out}.alice.key and {args.out}.bob.key")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as e:
        print(f"transport error: {e}", file=sys.stderr)
        return e.code
    except (ValueError, CacheError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
