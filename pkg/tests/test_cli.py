"""Command-line interface tests.

Fast paths (construct, genpair, simulate, bench, usage errors) drive
``main()`` in process and inspect the emitted files and streams; the
two-party ``reconcile`` command is exercised end to end as two separate
OS processes talking over a localhost socket, covering the success,
CRC-failure, and negotiation-abort exit codes.
"""

import csv
import json
import os
import socket
import subprocess
import sys

import numpy as np
import pytest

from polarir import BitBlock
from polarir.cli import (
    BENCH_COLUMNS,
    CSV_COLUMNS,
    EXIT_OK,
    EXIT_RECONCILE_FAILED,
    EXIT_USAGE,
    main,
    read_key_file,
    write_key_file,
)
from polarir.construction import DEFAULT_FIDELITY, cache_path
from polarir.metrics import failure_rate, reconciliation_yield

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")

ABORT_HASH_EXIT = 16  # TransportError codes double as exit statuses


@pytest.fixture(scope="module")
def cache_dir(tmp_path_factory):
    """Prebuilt constructions so CLI runs never pay for a build twice."""
    d = tmp_path_factory.mktemp("clicache")
    for qber in ("0.02", "0.05", "0.4"):
        rc = main(["construct", "--n", "256", "--qber", qber,
                   "--cache-dir", str(d)])
        assert rc == EXIT_OK
    return d


def run_cli(argv, cache=None, timeout=120):
    env = dict(os.environ)
    if cache is not None:
        env["POLARIR_CACHE_DIR"] = str(cache)
    return subprocess.run(
        [sys.executable, "-m", "polarir.cli", *argv],
        capture_output=True, text=True, env=env, timeout=timeout,
    )


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestKeyFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        for bits in (1, 7, 8, 9, 64, 255, 1024):
            block = BitBlock(rng.integers(0, 2, bits, dtype=np.uint8))
            path = tmp_path / f"k{bits}.key"
            write_key_file(str(path), block)
            assert read_key_file(str(path)) == block
            assert path.stat().st_size == 8 + (bits + 7) // 8

    def test_on_disk_layout(self, tmp_path):
        # 8-byte big-endian bit count, then LSB-first packed bits.
        path = tmp_path / "golden.key"
        write_key_file(str(path), BitBlock(np.array([1, 0, 1, 1, 0, 0, 0, 0, 1])))
        assert path.read_bytes() == (9).to_bytes(8, "big") + b"\x0d\x01"

    def test_truncated_header_rejected(self, tmp_path):
        path = tmp_path / "short.key"
        path.write_bytes(b"\x00\x00\x00")
        with pytest.raises(ValueError, match="truncated header"):
            read_key_file(str(path))

    def test_byte_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "lying.key"
        path.write_bytes((16).to_bytes(8, "big") + b"\xff")  # claims 16 bits
        with pytest.raises(ValueError, match="lying.key"):
            read_key_file(str(path))

    def test_nonzero_padding_rejected(self, tmp_path):
        path = tmp_path / "pad.key"
        path.write_bytes((3).to_bytes(8, "big") + b"\x0f")  # bit 3 is padding
        with pytest.raises(ValueError, match="pad.key"):
            read_key_file(str(path))


class TestEntryPoint:
    def test_module_help_exits_zero(self):
        result = run_cli(["--help"])
        assert result.returncode == 0
        assert "polarir" in result.stdout
        for command in ("construct", "simulate", "reconcile", "bench", "genpair"):
            assert command in result.stdout

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == EXIT_USAGE


class TestConstructCommand:
    def test_build_then_hit(self, tmp_path, capsys):
        argv = ["construct", "--n", "8", "--qber", "0.05",
                "--cache-dir", str(tmp_path)]
        expected = cache_path(str(tmp_path), 8, 0.05,
                              "degrading_merge", DEFAULT_FIDELITY)

        assert main(argv) == EXIT_OK
        assert capsys.readouterr().out == f"built: {expected}\n"
        assert os.path.exists(expected)

        assert main(argv) == EXIT_OK
        assert capsys.readouterr().out == f"cache hit: {expected}\n"

    def test_methods_cache_separately(self, tmp_path, capsys):
        base = ["construct", "--n", "8", "--qber", "0.05",
                "--cache-dir", str(tmp_path)]
        assert main(base + ["--method", "bhattacharyya"]) == EXIT_OK
        assert main(base + ["--method", "degrading_merge"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("built: ") == 2
        assert os.path.exists(
            cache_path(str(tmp_path), 8, 0.05, "bhattacharyya", DEFAULT_FIDELITY)
        )

    def test_env_var_supplies_cache_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("POLARIR_CACHE_DIR", str(tmp_path))
        assert main(["construct", "--n", "8", "--qber", "0.02"]) == EXIT_OK
        assert str(tmp_path) in capsys.readouterr().out

    def test_no_cache_dir_anywhere_is_usage_error(self, monkeypatch, capsys):
        monkeypatch.delenv("POLARIR_CACHE_DIR", raising=False)
        assert main(["construct", "--n", "8", "--qber", "0.02"]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert err.startswith("error:") and "POLARIR_CACHE_DIR" in err

    def test_corrupted_cache_is_reported(self, tmp_path, capsys):
        argv = ["construct", "--n", "8", "--qber", "0.05",
                "--cache-dir", str(tmp_path)]
        assert main(argv) == EXIT_OK
        path = cache_path(str(tmp_path), 8, 0.05,
                          "degrading_merge", DEFAULT_FIDELITY)
        raw = bytearray(open(path, "rb").read())
        raw[-1] ^= 0xFF
        open(path, "wb").write(bytes(raw))
        capsys.readouterr()

        assert main(argv) == EXIT_USAGE
        assert capsys.readouterr().err.startswith("error:")


class TestGenpairCommand:
    def test_writes_correlated_pair(self, tmp_path, capsys):
        prefix = str(tmp_path / "pair")
        rc = main(["genpair", "--n", "4096", "--qber", "0.05",
                   "--seed", "1", "--out", prefix])
        assert rc == EXIT_OK
        assert "wrote" in capsys.readouterr().out
        alice = read_key_file(f"{prefix}.alice.key")
        bob = read_key_file(f"{prefix}.bob.key")
        assert len(alice) == len(bob) == 4096
        weight = int(np.bitwise_xor(alice.bits, bob.bits).sum())
        sigma = (4096 * 0.05 * 0.95) ** 0.5
        assert abs(weight - 4096 * 0.05) < 4 * sigma

    def test_zero_noise_pair_is_identical(self, tmp_path):
        prefix = str(tmp_path / "clean")
        assert main(["genpair", "--n", "256", "--qber", "0",
                     "--seed", "5", "--out", prefix]) == EXIT_OK
        alice = (tmp_path / "clean.alice.key").read_bytes()
        bob = (tmp_path / "clean.bob.key").read_bytes()
        assert alice == bob

    def test_seed_determines_bytes(self, tmp_path):
        for run in ("a", "b"):
            main(["genpair", "--n", "256", "--qber", "0.05",
                  "--seed", "9", "--out", str(tmp_path / run)])
        main(["genpair", "--n", "256", "--qber", "0.05",
              "--seed", "10", "--out", str(tmp_path / "c")])
        a = (tmp_path / "a.alice.key").read_bytes()
        b = (tmp_path / "b.alice.key").read_bytes()
        c = (tmp_path / "c.alice.key").read_bytes()
        assert a == b and a != c


class TestSimulateCommand:
    @pytest.fixture(scope="class")
    def csv_rows(self, cache_dir, tmp_path_factory):
        out = tmp_path_factory.mktemp("sim") / "rows.csv"
        rc = main(["simulate", "--n", "256", "--qber", "0.05",
                   "--num-frozen", "80,106", "--list-size", "1,4",
                   "--trials", "60", "--seed", "7",
                   "--cache-dir", str(cache_dir), "--out", str(out)])
        assert rc == EXIT_OK
        with open(out, newline="") as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == list(CSV_COLUMNS)
            return list(reader)

    def test_grid_shape_and_order(self, csv_rows):
        # frozen-count outer, list-size inner, matching the sweep grid
        assert [(int(r["k"]), int(r["L"])) for r in csv_rows] == [
            (176, 1), (176, 4), (150, 1), (150, 4),
        ]
        assert all(r["strategy"] == "fbe" and r["n"] == "256" for r in csv_rows)

    def test_rows_are_self_consistent(self, csv_rows):
        for row in csv_rows:
            failures, trials = int(row["failures"]), int(row["trials"])
            assert trials == 60 and 0 <= failures <= trials
            eps = failure_rate(failures, trials)
            assert float(row["eps_point"]) == pytest.approx(eps.point, abs=1e-12)
            assert float(row["eps_ci_low"]) == pytest.approx(eps.ci_low, abs=1e-9)
            assert float(row["eps_ci_high"]) == pytest.approx(eps.ci_high, abs=1e-9)
            f_excl = float(row["f_excl_crc"])
            assert float(row["f_incl_crc"]) > f_excl
            assert float(row["yield"]) == pytest.approx(
                reconciliation_yield(f_excl, eps.point, 0.05), rel=1e-6
            )
            seconds = float(row["decode_seconds_total"])
            assert seconds > 0
            assert float(row["throughput_bps"]) == pytest.approx(
                256 * trials / seconds, rel=1e-6
            )

    def test_failure_counts_are_reproducible(self, cache_dir, tmp_path):
        counts = []
        for run in ("x", "y"):
            out = tmp_path / f"{run}.csv"
            main(["simulate", "--n", "256", "--qber", "0.05",
                  "--num-frozen", "106", "--list-size", "4",
                  "--trials", "40", "--seed", "3",
                  "--cache-dir", str(cache_dir), "--out", str(out)])
            with open(out, newline="") as fh:
                counts.append([r["failures"] for r in csv.DictReader(fh)])
        assert counts[0] == counts[1]

    def test_json_lines_with_zero_noise_nulls(self, cache_dir, tmp_path):
        # Efficiency and yield divide by H2(qber); at qber 0 the CSV gets
        # NaN and the JSON encoding must use null, not the string "NaN".
        out = tmp_path / "rows.jsonl"
        rc = main(["simulate", "--n", "256", "--qber", "0",
                   "--num-frozen", "60", "--list-size", "1",
                   "--trials", "20", "--seed", "0",
                   "--cache-dir", str(cache_dir),
                   "--format", "json-lines", "--out", str(out)])
        assert rc == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 1
        row = json.loads(lines[0])
        assert list(row) == list(CSV_COLUMNS)
        assert row["failures"] == 0 and row["eps_point"] == 0.0
        assert row["f_excl_crc"] is None
        assert row["f_incl_crc"] is None
        assert row["yield"] is None

    def test_default_output_is_stdout(self, cache_dir, capsys):
        rc = main(["simulate", "--n", "256", "--qber", "0.05",
                   "--num-frozen", "106", "--list-size", "1",
                   "--trials", "10", "--seed", "0",
                   "--cache-dir", str(cache_dir)])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith(",".join(CSV_COLUMNS[:3]))
        assert len(out.splitlines()) == 2


class TestBenchCommand:
    def test_table_covers_both_schedules(self, cache_dir, tmp_path):
        out = tmp_path / "bench.csv"
        rc = main(["bench", "--n", "256", "--qber", "0.05",
                   "--num-frozen", "106", "--list-size", "1,4",
                   "--trials", "6", "--seed", "0",
                   "--cache-dir", str(cache_dir), "--out", str(out)])
        assert rc == EXIT_OK
        with open(out, newline="") as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == list(BENCH_COLUMNS)
            rows = list(reader)
        assert [(r["mode"], int(r["L"])) for r in rows] == [
            ("scl", 1), ("scl", 4), ("fsscl", 1), ("fsscl", 4),
        ]
        for row in rows:
            assert int(row["k"]) == 150 and int(row["trials"]) == 6
            assert float(row["decode_seconds_total"]) > 0
            assert float(row["throughput_bps"]) > 0


class TestUsageErrors:
    def test_code_point_flags_are_exclusive(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["simulate", "--n", "256", "--qber", "0.05",
                  "--f-target", "1.45", "--num-frozen", "106"])
        assert excinfo.value.code == EXIT_USAGE

    def test_non_power_of_two_block(self, capsys):
        rc = main(["simulate", "--n", "100", "--qber", "0.05",
                   "--num-frozen", "10", "--trials", "5"])
        assert rc == EXIT_USAGE
        assert capsys.readouterr().err.startswith("error:")

    def test_qber_out_of_range(self, tmp_path, capsys):
        rc = main(["genpair", "--n", "256", "--qber", "0.6",
                   "--out", str(tmp_path / "p")])
        assert rc == EXIT_USAGE
        assert capsys.readouterr().err.startswith("error:")

    def test_reconcile_key_length_mismatch(self, cache_dir, tmp_path, capsys):
        key = tmp_path / "short.key"
        write_key_file(str(key), BitBlock.zeros(64))
        rc = main(["reconcile", "--n", "256", "--qber", "0.02",
                   "--role", "alice", "--connect", "127.0.0.1:1",
                   "--num-frozen", "106", "--key-in", str(key),
                   "--cache-dir", str(cache_dir)])
        assert rc == EXIT_USAGE
        assert "expected n=256" in capsys.readouterr().err

    def test_reconcile_malformed_address(self, cache_dir, tmp_path, capsys):
        key = tmp_path / "full.key"
        write_key_file(str(key), BitBlock.zeros(256))
        rc = main(["reconcile", "--n", "256", "--qber", "0.02",
                   "--role", "alice", "--connect", "nohost",
                   "--num-frozen", "106", "--key-in", str(key),
                   "--cache-dir", str(cache_dir)])
        assert rc == EXIT_USAGE
        assert "host:port" in capsys.readouterr().err


class TestReconcileTwoProcess:
    @staticmethod
    def run_session(cache_dir, tmp_path, qber, pair_seed,
                    alice_extra=(), bob_extra=()):
        prefix = str(tmp_path / "pair")
        assert main(["genpair", "--n", "256", "--qber", str(qber),
                     "--seed", str(pair_seed), "--out", prefix]) == EXIT_OK
        addr = f"127.0.0.1:{free_port()}"
        base = ["reconcile", "--n", "256", "--qber", str(qber),
                "--num-frozen", "106", "--list-size", "8"]
        out_a = tmp_path / "alice.out.key"
        out_b = tmp_path / "bob.out.key"
        env = dict(os.environ, POLARIR_CACHE_DIR=str(cache_dir))
        bob = subprocess.Popen(
            [sys.executable, "-m", "polarir.cli", *base,
             "--role", "bob", "--listen", addr,
             "--key-in", f"{prefix}.bob.key", "--out", str(out_b), *bob_extra],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env,
        )
        try:
            alice = subprocess.run(
                [sys.executable, "-m", "polarir.cli", *base,
                 "--role", "alice", "--connect", addr,
                 "--key-in", f"{prefix}.alice.key", "--out", str(out_a),
                 *alice_extra],
                capture_output=True, text=True, env=env, timeout=90,
            )
            bob_out, bob_err = bob.communicate(timeout=90)
        finally:
            bob.kill()
        return alice, (bob.returncode, bob_out, bob_err), out_a, out_b

    def test_success_yields_identical_key_files(self, cache_dir, tmp_path):
        alice, (bob_rc, bob_out, _), out_a, out_b = self.run_session(
            cache_dir, tmp_path, qber=0.02, pair_seed=0
        )
        assert alice.returncode == EXIT_OK, alice.stderr
        assert bob_rc == EXIT_OK
        assert "reconciled 150 key bits" in alice.stdout
        assert "reconciled 150 key bits" in bob_out
        key_a = read_key_file(str(out_a))
        key_b = read_key_file(str(out_b))
        assert len(key_a) == 150 and key_a == key_b

    def test_zero_noise_session(self, cache_dir, tmp_path):
        alice, (bob_rc, _, _), out_a, out_b = self.run_session(
            cache_dir, tmp_path, qber=0, pair_seed=1
        )
        assert alice.returncode == EXIT_OK, alice.stderr
        assert bob_rc == EXIT_OK
        assert read_key_file(str(out_a)) == read_key_file(str(out_b))

    def test_crc_failure_exits_three_and_writes_nothing(self, cache_dir, tmp_path):
        # 40% flips against a code built for 2% cannot decode
        alice, (bob_rc, _, bob_err), out_a, out_b = self.run_session(
            cache_dir, tmp_path, qber=0.4, pair_seed=0
        )
        assert alice.returncode == EXIT_RECONCILE_FAILED
        assert bob_rc == EXIT_RECONCILE_FAILED
        assert "reconciliation failed" in alice.stderr
        assert "reconciliation failed" in bob_err
        assert not out_a.exists() and not out_b.exists()

    def test_strategy_disagreement_aborts_both_ends(self, cache_dir, tmp_path):
        alice, (bob_rc, _, bob_err), out_a, out_b = self.run_session(
            cache_dir, tmp_path, qber=0.02, pair_seed=0,
            alice_extra=("--strategy", "fbe"), bob_extra=("--strategy", "dd"),
        )
        assert alice.returncode == ABORT_HASH_EXIT
        assert bob_rc == ABORT_HASH_EXIT
        assert "transport error" in alice.stderr
        assert "transport error" in bob_err
        assert not out_a.exists() and not out_b.exists()
