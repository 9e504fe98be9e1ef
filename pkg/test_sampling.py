"""Tests for graphs/sampling.py."""

import math

import numpy as np
import pytest
from scipy import stats

from graphs.sampling import (
    BondLengths,
    RngStream,
    SpinConfiguration,
    angle_from_matrix,
    length_interval,
    quaternion_to_su2,
    sample_angles,
    sample_bond_lengths,
    sample_spin_configuration,
    semicircle_cdf,
    sine_squared_cdf,
    trace_second_moment,
)
from utils.errors import InvalidArgumentError, InvalidConfigurationError


class TestRngStream:
    def test_same_triple_same_draws(self):
        a = RngStream(42, 3, "spins").generator().random(5)
        b = RngStream(42, 3, "spins").generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_index_and_purpose_separate_streams(self):
        base = RngStream(42, 3, "spins").generator().random(5)
        other_index = RngStream(42, 4, "spins").generator().random(5)
        other_purpose = RngStream(42, 3, "lengths").generator().random(5)
        assert not np.array_equal(base, other_index)
        assert not np.array_equal(base, other_purpose)

    def test_spawn_is_reproducible_and_distinct(self):
        stream = RngStream(7, 0, "montecarlo")
        np.testing.assert_array_equal(
            stream.spawn(2).generator().random(3), stream.spawn(2).generator().random(3)
        )
        assert not np.array_equal(stream.spawn(1).generator().random(3), stream.spawn(2).generator().random(3))

    def test_provenance(self):
        assert RngStream(5, 1, "spins").provenance() == {
            "master_seed": 5,
            "stream_index": 1,
            "purpose": "spins",
        }


class TestBondLengths:
    def test_rejects_empty_and_non_positive(self):
        with pytest.raises(InvalidArgumentError):
            BondLengths([])
        with pytest.raises(InvalidArgumentError):
            BondLengths([1.0, -0.5])

    def test_interval(self):
        assert length_interval(5) == (0.9, 1.1)
        with pytest.raises(InvalidArgumentError):
            length_interval(0)

    @pytest.mark.parametrize("B", [1, 2, 21, 101])
    def test_sampled_lengths_in_interval_and_distinct(self, B):
        lengths = sample_bond_lengths(B, RngStream(11, 0, "lengths"))
        assert lengths.B == B
        assert lengths.in_interval()
        assert lengths.min_gap() >= 1e-9

    def test_sampling_is_deterministic(self):
        a = sample_bond_lengths(10, RngStream(3, 0, "lengths"))
        b = sample_bond_lengths(10, RngStream(3, 0, "lengths"))
        np.testing.assert_array_equal(a.lengths, b.lengths)

    def test_zero_bonds(self):
        with pytest.raises(InvalidArgumentError):
            sample_bond_lengths(0, RngStream(3))

    def test_lengths_are_read_only(self):
        lengths = BondLengths([1.0, 1.1])
        with pytest.raises(ValueError):
            lengths.lengths[0] = 2.0

    def test_scaled(self):
        lengths = BondLengths([1.0, 1.1]).scaled(2.0)
        np.testing.assert_allclose(lengths.lengths, [2.0, 2.2])
        assert lengths.total == pytest.approx(4.2)


class TestSpinConfiguration:
    def test_angle_from_matrix(self):
        assert angle_from_matrix(np.eye(2)) == 0.0
        assert angle_from_matrix(np.diag([1j, -1j])) == pytest.approx(math.pi / 2)
        assert angle_from_matrix(-np.eye(2)) == pytest.approx(math.pi)

    def test_quaternion_map_is_special_unitary(self):
        q = np.array([0.5, 0.5, 0.5, 0.5])
        w = quaternion_to_su2(q)
        np.testing.assert_allclose(w.conj().T @ w, np.eye(2), atol=1e-14)
        assert np.linalg.det(w) == pytest.approx(1.0)

    def test_from_angles(self):
        config = SpinConfiguration.from_angles([0.3, 2.0])
        np.testing.assert_allclose(config.angles, [0.3, 2.0])
        assert config.B == 2

    @pytest.mark.parametrize("angle", [0.0, math.pi])
    def test_identity_rejected(self, angle):
        with pytest.raises(InvalidConfigurationError):
            SpinConfiguration.from_angles([1.0, angle])

    def test_non_unitary_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SpinConfiguration(np.array([[[2.0, 0.0], [0.0, 0.5]]]))

    def test_sampled_configuration(self):
        config = sample_spin_configuration(50, RngStream(9, 0, "spins"))
        assert config.B == 50
        assert np.all((config.angles > 0.0) & (config.angles < math.pi))
        traces = np.trace(config.matrices, axis1=1, axis2=2)
        np.testing.assert_allclose(traces.real, 2.0 * np.cos(config.angles), atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(config.matrices), 1.0, atol=1e-12)


class TestDistributions:
    def test_cdfs_at_endpoints(self):
        assert sine_squared_cdf(0.0) == 0.0
        assert sine_squared_cdf(math.pi) == pytest.approx(1.0)
        assert semicircle_cdf(-2.0) == pytest.approx(0.0, abs=1e-15)
        assert semicircle_cdf(0.0) == pytest.approx(0.5)
        assert semicircle_cdf(2.0) == pytest.approx(1.0)

    def test_angles_follow_sine_squared_law(self):
        angles = sample_angles(100_000, RngStream(2024, 0, "spins"))
        assert stats.kstest(angles, sine_squared_cdf).pvalue > 0.01

    def test_traces_follow_semicircle_law(self):
        config = sample_spin_configuration(100_000, RngStream(2025, 0, "spins"))
        traces = np.trace(config.matrices, axis1=1, axis2=2).real
        assert stats.kstest(traces, semicircle_cdf).pvalue > 0.01

    def test_trace_second_moment_is_one(self):
        mean, stderr = trace_second_moment(100_000, RngStream(1, 0, "spins"))
        assert abs(mean - 1.0) < 3.0 * stderr
