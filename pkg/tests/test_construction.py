"""Code-construction tests.

Oracles: hand-derived closed forms for one polarization step of a binary
symmetric channel — the worse synthetic channel is itself a BSC with
crossover 2p(1-p) and the better one amounts to two independent looks at
the input (error probability p^2 + p(1-p) = p) — plus a pure recursive
re-implementation of the Bhattacharyya recursion written here in plain
Python.  Degrading-merge output is checked against those exact values,
against the (looser) Bhattacharyya bounds, and for stability in the
output-alphabet cap.
"""

import numpy as np
import pytest

from polarir import (
    CacheError,
    CodeConstruction,
    cache_path,
    construct_bsc,
    construct_or_load,
    load_cache,
    save_cache,
)


def bhattacharyya_reference(n: int, qber: float) -> list[float]:
    """Recursive scalar recursion: z -> (2z - z^2, z^2), natural order."""
    def expand(z: float, size: int) -> list[float]:
        if size == 1:
            return [z]
        return expand(2 * z - z * z, size // 2) + expand(z * z, size // 2)

    # channel i has bit-index path given by i's bits, most significant first;
    # the natural-order recursion above visits minus before plus at each level.
    return expand(2.0 * float(np.sqrt(qber * (1.0 - qber))), n)


class TestBhattacharyya:
    @pytest.mark.parametrize("p", [0.02, 0.05, 0.25])
    def test_single_step_hand_values(self, p):
        z = 2.0 * np.sqrt(p * (1.0 - p))
        c = construct_bsc(2, p, "bhattacharyya")
        assert c.upper_bounds == pytest.approx([2 * z - z * z, z * z], abs=1e-15)

    @pytest.mark.parametrize("n", [8, 64, 512])
    def test_matches_recursive_reference(self, n):
        c = construct_bsc(n, 0.02, "bhattacharyya")
        assert c.upper_bounds == pytest.approx(bhattacharyya_reference(n, 0.02), abs=1e-12)

    def test_n8_reliability_order(self):
        c = construct_bsc(8, 0.02, "bhattacharyya")
        assert c.reliability_order.tolist() == [0, 1, 2, 4, 3, 5, 6, 7]

    def test_extreme_channels(self):
        # channel 0 (all minus steps) is always the worst, channel n-1 the best
        c = construct_bsc(64, 0.02, "bhattacharyya")
        assert c.reliability_order[0] == 0
        assert c.reliability_order[-1] == 63

    def test_vanishing_noise_limit(self):
        c = construct_bsc(8, 1e-9, "bhattacharyya")
        assert c.upper_bounds.max() < 1e-3

    def test_bounds_in_unit_interval(self):
        # the worst channels saturate to exactly 1.0 in float64 at high qber
        c = construct_bsc(256, 0.11, "bhattacharyya")
        assert (c.upper_bounds > 0).all() and (c.upper_bounds <= 1).all()

    def test_fidelity_recorded_as_zero(self):
        assert construct_bsc(8, 0.02, "bhattacharyya", fidelity=64).fidelity == 0


class TestDegradingMerge:
    @pytest.mark.parametrize("p", [0.02, 0.05, 0.11])
    def test_single_step_exact(self, p):
        # one step has tiny output alphabets, so the merge changes nothing
        # and the bounds equal the exact MAP error probabilities.
        c = construct_bsc(2, p, "degrading_merge", 64)
        assert c.upper_bounds == pytest.approx([2 * p * (1 - p), p], abs=1e-12)

    def test_single_step_exact_at_minimum_fidelity(self):
        c = construct_bsc(2, 0.02, "degrading_merge", 4)
        assert c.upper_bounds == pytest.approx([0.0392, 0.02], abs=1e-12)

    def test_never_above_bhattacharyya(self, construction_1024):
        loose = construct_bsc(1024, 0.02, "bhattacharyya")
        assert (construction_1024.upper_bounds <= loose.upper_bounds + 1e-12).all()

    def test_stable_in_fidelity(self, construction_1024):
        coarse = construct_bsc(1024, 0.02, "degrading_merge", 32)
        diff = np.abs(coarse.upper_bounds - construction_1024.upper_bounds)
        assert diff.max() < 1e-3

    def test_polarization_fractions(self, construction_1024):
        # at n=1024 and qber 0.02 roughly half the channels are already
        # near-noiseless and roughly a tenth are near-useless; the split
        # brackets the capacity limits 0.8586 / 0.1414 from below.
        b = construction_1024.upper_bounds
        assert 0.40 < (b < 1e-9).mean() < 0.8586
        assert 0.07 < (b > 0.4).mean() < 0.1415

    def test_methods_agree_on_most_frozen_channels(self, construction_1024):
        loose = construct_bsc(1024, 0.02, "bhattacharyya")
        dm = set(construction_1024.reliability_order[:210].tolist())
        bh = set(loose.reliability_order[:210].tolist())
        assert len(dm & bh) >= 0.75 * 210


class TestValidation:
    @pytest.mark.parametrize("n", [0, 1, 3, 6, 100])
    def test_block_length_must_be_power_of_two(self, n):
        with pytest.raises(ValueError, match="power of two"):
            construct_bsc(n, 0.02)

    @pytest.mark.parametrize("q", [0.0, -0.1, 0.5, 0.7])
    def test_qber_range(self, q):
        with pytest.raises(ValueError, match="qber"):
            construct_bsc(8, q)

    @pytest.mark.parametrize("fid", [0, 2, 3, 7])
    def test_fidelity_must_be_even_and_at_least_four(self, fid):
        with pytest.raises(ValueError, match="fidelity"):
            construct_bsc(8, 0.02, "degrading_merge", fid)

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="method"):
            construct_bsc(8, 0.02, "gaussian_approximation")


class TestFrozenSelection:
    def test_freezes_least_reliable(self, construction_1024):
        fv = construction_1024.frozen_vector(210)
        frozen = np.flatnonzero(fv.mask.bits)
        assert set(frozen.tolist()) == set(construction_1024.reliability_order[:210].tolist())

    def test_frozen_channels_are_the_worst(self, construction_1024):
        fv = construction_1024.frozen_vector(210)
        b = construction_1024.upper_bounds
        frozen = fv.mask.bits.astype(bool)
        assert b[~frozen].max() <= b[frozen].min() + 1e-15

    @pytest.mark.parametrize("nf", [0, 1024, 2000])
    def test_num_frozen_range(self, construction_1024, nf):
        with pytest.raises(ValueError, match="num_frozen"):
            construction_1024.frozen_vector(nf)


class TestCache:
    def test_round_trip(self, construction_1024, tmp_path):
        path = str(tmp_path / "c.pcc")
        save_cache(construction_1024, path)
        loaded = load_cache(path)
        assert isinstance(loaded, CodeConstruction)
        assert loaded.n == 1024 and loaded.qber == 0.02
        assert loaded.method == "degrading_merge" and loaded.fidelity == 64
        assert np.array_equal(loaded.reliability_order, construction_1024.reliability_order)
        assert np.array_equal(loaded.upper_bounds, construction_1024.upper_bounds)

    def test_serialize_is_deterministic(self, construction_1024):
        assert construction_1024.serialize() == construction_1024.serialize()

    def test_corrupted_byte_rejected(self, construction_1024, tmp_path):
        path = tmp_path / "c.pcc"
        save_cache(construction_1024, str(path))
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CacheError, match="checksum"):
            load_cache(str(path))

    def test_truncated_file_rejected(self, construction_1024, tmp_path):
        path = tmp_path / "c.pcc"
        save_cache(construction_1024, str(path))
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(CacheError, match="truncated"):
            load_cache(str(path))

    def test_bad_magic_rejected(self, construction_1024, tmp_path):
        path = tmp_path / "c.pcc"
        save_cache(construction_1024, str(path))
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CacheError, match="magic"):
            load_cache(str(path))

    def test_cache_path_naming(self):
        assert cache_path("/tmp/x", 1024, 0.02, "degrading_merge", 64) == (
            "/tmp/x/pcir_n1024_q20000_degrading_merge_mu64.pcc"
        )
        # bhattacharyya has no fidelity knob, so the name pins it to zero
        assert cache_path("/tmp/x", 8, 0.02, "bhattacharyya", 64).endswith("_mu0.pcc")


class TestConstructOrLoad:
    def test_without_cache_dir_builds_and_warns(self):
        with pytest.warns(UserWarning, match="building n=8"):
            c = construct_or_load(8, 0.02, "bhattacharyya")
        assert c.n == 8

    def test_miss_then_hit(self, tmp_path):
        with pytest.warns(UserWarning, match="cache miss"):
            built = construct_or_load(8, 0.02, "bhattacharyya", cache_dir=str(tmp_path))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            again = construct_or_load(8, 0.02, "bhattacharyya", cache_dir=str(tmp_path))
        assert np.array_equal(built.reliability_order, again.reliability_order)
        assert np.array_equal(built.upper_bounds, again.upper_bounds)
