"""MUSIC window concatenation, spectrum and path estimation."""

import numpy as np
import pytest

from conftest import default_geometry

from csitrack.aod import (
    AodConfig,
    angle_grid,
    concat_window,
    estimate_paths,
    music_spectrum,
)
from csitrack.core import CsiRecord, circular_distance, steering_matrix, steering_vector
from csitrack.errors import WindowUnderfullError


def make_records(X, ap_id="ap0", interval=0.006):
    return [
        CsiRecord(ap_id, p, p * interval, X[:, p]) for p in range(X.shape[1])
    ]


def synth_window(geometry, aods, num_packets, seed=0, snr_db=None, diverse=True):
    """X = A G with diverse weights, optionally plus noise."""
    rng = np.random.default_rng(seed)
    matrix = steering_matrix(geometry, aods)
    L = len(aods)
    if diverse:
        weights = rng.normal(size=(L, num_packets)) + 1j * rng.normal(size=(L, num_packets))
    else:
        fixed = rng.normal(size=(L, 1)) + 1j * rng.normal(size=(L, 1))
        weights = np.repeat(fixed, num_packets, axis=1)
    X = matrix @ weights
    if snr_db is not None:
        power = np.mean(np.abs(X) ** 2)
        sigma = np.sqrt(power * 10 ** (-snr_db / 10) / 2)
        X = X + sigma * (rng.normal(size=X.shape) + 1j * rng.normal(size=X.shape))
    return X


class TestConcatWindow:
    def test_single_record_gives_column(self):
        csi = np.array([1 + 1j, 2 - 1j, 0.5j])
        X = concat_window([CsiRecord("ap0", 0, 0.0, csi)])
        assert X.shape == (3, 1)
        np.testing.assert_array_equal(X[:, 0], csi)

    def test_noiseless_two_path_window_has_rank_two(self):
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 40, seed=1)
        records = make_records(X)
        singular = np.linalg.svd(concat_window(records), compute_uv=False)
        assert singular[2] < 1e-8 * singular[0]
        assert singular[1] > 1e-3 * singular[0]

    def test_mixed_aps_rejected(self):
        records = [
            CsiRecord("ap0", 0, 0.0, np.ones(3)),
            CsiRecord("ap1", 1, 0.006, np.ones(3)),
        ]
        with pytest.raises(ValueError):
            concat_window(records)

    def test_underfull_window_raises(self):
        records = [CsiRecord("ap0", 0, 0.0, np.ones(3))]
        with pytest.raises(WindowUnderfullError):
            concat_window(records, min_packets=20)


class TestMusicSpectrum:
    def test_single_path_peak_within_one_grid_step(self):
        geometry = default_geometry()
        grid = angle_grid(np.radians(0.5))
        theta = 1.0
        X = synth_window(geometry, [theta], 50, seed=2)
        spectrum = music_spectrum(X, geometry, grid, num_paths=1)
        peak = grid[np.argmax(spectrum)]
        assert circular_distance(peak, theta) <= np.radians(0.5)

    def test_two_paths_60_degrees_apart_at_25db(self):
        geometry = default_geometry()
        grid = angle_grid(np.radians(0.5))
        aods = np.array([1.0, 1.0 + np.radians(60)])
        X = synth_window(geometry, aods, 100, seed=3, snr_db=25.0)
        spectrum = music_spectrum(X, geometry, grid, num_paths=2)
        local = (spectrum > np.roll(spectrum, 1)) & (spectrum > np.roll(spectrum, -1))
        peaks = grid[local][np.argsort(spectrum[local])[-2:]]
        for truth in aods:
            assert min(circular_distance(peaks, truth)) < np.radians(2.0)

    def test_identical_columns_degenerate_but_returns(self):
        # stationary target: covariance is rank one, the second path is
        # unidentifiable, but the spectrum itself is still well defined
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 30, seed=4, diverse=False)
        assert np.linalg.matrix_rank(X @ X.conj().T, tol=1e-9) == 1
        grid = angle_grid(np.radians(0.5))
        spectrum = music_spectrum(X, geometry, grid, num_paths=2)
        assert spectrum.shape == grid.shape
        assert np.all(np.isfinite(spectrum) | (spectrum > 0))

    def test_nonfinite_covariance_rejected(self):
        geometry = default_geometry()
        X = np.full((3, 5), np.nan, dtype=complex)
        with pytest.raises(ValueError):
            music_spectrum(X, geometry, angle_grid(0.01), num_paths=1)

    def test_per_column_phase_invariance(self):
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 64, seed=5, snr_db=20.0)
        rng = np.random.default_rng(6)
        phased = X * np.exp(1j * rng.uniform(0, 2 * np.pi, X.shape[1]))
        grid = angle_grid(np.radians(0.5))
        base = music_spectrum(X, geometry, grid, num_paths=2)
        rotated = music_spectrum(phased, geometry, grid, num_paths=2)
        np.testing.assert_allclose(rotated, base, rtol=1e-9)


class TestEstimatePaths:
    def test_recovers_two_paths_ideal(self):
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 60, seed=7)
        paths = estimate_paths(make_records(X), geometry, AodConfig(min_packets=20))
        np.testing.assert_allclose(paths.aods, [0.8, 2.1], atol=0.01)
        assert not paths.degenerate

    def test_single_path_matrix_matches_steering_vector(self):
        geometry = default_geometry()
        X = synth_window(geometry, [2.4], 30, seed=8)
        config = AodConfig(num_paths=1, min_packets=10)
        paths = estimate_paths(make_records(X), geometry, config)
        np.testing.assert_array_equal(
            paths.steering_matrix[:, 0], steering_vector(geometry, paths.aods[0])
        )

    def test_output_sorted_ascending(self):
        geometry = default_geometry()
        X = synth_window(geometry, [4.9, 0.4], 60, seed=9)
        paths = estimate_paths(make_records(X), geometry, AodConfig(min_packets=20))
        assert np.all(np.diff(paths.aods) > 0)

    def test_underfull_window_raises(self):
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 5, seed=10)
        with pytest.raises(WindowUnderfullError):
            estimate_paths(make_records(X), geometry, AodConfig(min_packets=20))

    def test_degenerate_flag_on_rank_one_window(self):
        geometry = default_geometry()
        X = synth_window(geometry, [0.8, 2.1], 30, seed=11, diverse=False)
        paths = estimate_paths(make_records(X), geometry, AodConfig(min_packets=10))
        assert paths.num_paths == 2  # still returns L angles

    def test_refinement_beats_grid_quantization(self):
        geometry = default_geometry()
        theta = 1.23456  # off-grid on purpose
        X = synth_window(geometry, [theta], 40, seed=12)
        config = AodConfig(num_paths=1, min_packets=10)
        paths = estimate_paths(make_records(X), geometry, config)
        assert circular_distance(paths.aods[0], theta) < 1e-5

    @pytest.mark.parametrize("theta", [0.002, 2 * np.pi - 0.002])
    def test_peak_on_wrap_boundary(self, theta):
        # the grid is cyclic: a path right at 0/2*pi must not be lost
        geometry = default_geometry()
        X = synth_window(geometry, [theta], 40, seed=14)
        config = AodConfig(num_paths=1, min_packets=10)
        paths = estimate_paths(make_records(X), geometry, config)
        assert circular_distance(paths.aods[0], theta) < 1e-4

    def test_multi_packet_beats_single_packet(self):
        # mean error over many seeds: 100 diverse packets vs a single packet
        geometry = default_geometry()
        truths = [0.9, 2.3]
        config = AodConfig(min_packets=1)
        multi_errors, single_errors = [], []
        for seed in range(60):
            X = synth_window(geometry, truths, 100, seed=seed, snr_db=20.0)
            multi = estimate_paths(make_records(X), geometry, config)
            single = estimate_paths(make_records(X[:, :1]), geometry, config)
            for truth in truths:
                multi_errors.append(min(circular_distance(multi.aods, truth)))
                single_errors.append(min(circular_distance(single.aods, truth)))
        assert np.mean(multi_errors) <= np.mean(single_errors)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AodConfig(num_paths=0)
        with pytest.raises(ValueError):
            AodConfig(grid_step=0.0)
        with pytest.raises(ValueError):
            AodConfig(window_seconds=0.0)
        geometry = default_geometry()
        X = synth_window(geometry, [0.8], 30, seed=13)
        with pytest.raises(ValueError):
            # 3 antennas cannot support 3 paths (no noise subspace left)
            estimate_paths(make_records(X), geometry, AodConfig(num_paths=3, min_packets=10))
