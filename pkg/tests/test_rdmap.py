"""Range profile and range-Doppler map transforms, sub-bin refinement."""

import dataclasses

import numpy as np
import pytest

from livesense import (
    CsiFrame,
    Scene,
    doppler_process,
    generate_frame,
    range_profile,
    refine_peak,
    velocity_axis,
)
from livesense.rdmap import parabolic_offset

from conftest import make_config, single_target_scene


def no_leak(scene: Scene) -> Scene:
    imp = dataclasses.replace(
        scene.impairments,
        leakage=dataclasses.replace(scene.impairments.leakage, amplitude=0.0),
    )
    return dataclasses.replace(scene, impairments=imp)


def batch_map(scene, config, n=None, start=0, window="hann", doppler_window="hann"):
    n = n or config.doppler_batch
    profiles = [
        range_profile(generate_frame(scene, config, start + m), config, window=window)
        for m in range(n)
    ]
    return doppler_process(profiles, config, window=doppler_window)


class TestRangeProfile:
    def test_zero_frame_gives_zero_profile(self, config):
        frame = CsiFrame(0.0, 0, np.zeros(512, dtype=complex))
        profile = range_profile(frame, config)
        np.testing.assert_array_equal(profile.bins, np.zeros_like(profile.bins))

    def test_unit_leakage_unwindowed(self):
        config = make_config(zero_pad_factor=1)
        frame = CsiFrame(0.0, 0, np.ones(512, dtype=complex))
        bins = range_profile(frame, config, window=None).bins
        assert abs(bins[0]) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(np.abs(bins[1:]), 0.0, atol=1e-12)

    def test_point_target_peak_amplitude(self):
        # Target at exactly bin 2: normalized peak equals its amplitude.
        config = make_config(zero_pad_factor=1)
        r0 = 2 * config.range_bin_m
        scene = no_leak(single_target_scene(r0, amplitude=0.1))
        frame = generate_frame(scene, config, 0)
        for window in (None, "hann"):
            bins = range_profile(frame, config, window=window).bins
            assert int(np.argmax(np.abs(bins))) == 2
            assert abs(bins[2]) == pytest.approx(0.1, abs=1e-3)

    def test_energy_conservation_unwindowed(self):
        config = make_config(zero_pad_factor=1, max_range_m=1e6)
        rng = np.random.default_rng(0)
        csi = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        bins = range_profile(CsiFrame(0.0, 0, csi), config, window=None).bins
        assert bins.shape[0] == 512  # uncropped at huge max range
        lhs = np.sum(np.abs(bins) ** 2)
        rhs = np.sum(np.abs(csi) ** 2) / 512
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_linearity(self, config):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        y = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        a, b = 1.5 - 0.5j, -2.0
        lhs = range_profile(CsiFrame(0.0, 0, a * x + b * y), config).bins
        rhs = (
            a * range_profile(CsiFrame(0.0, 0, x), config).bins
            + b * range_profile(CsiFrame(0.0, 0, y), config).bins
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_crop_length_tracks_config(self):
        assert range_profile(
            CsiFrame(0.0, 0, np.ones(512, dtype=complex)), make_config(mode="gesture")
        ).bins.shape[0] == make_config(mode="gesture").n_range_bins

    def test_efficiency_mode_decimates_but_keeps_resolution(self):
        config = make_config(mode="efficiency")
        assert config.decimation == 4
        assert config.range_bin_m == pytest.approx(
            make_config(zero_pad_factor=1).range_bin_m
        )
        r0 = 2 * config.range_bin_m
        scene = no_leak(single_target_scene(r0, amplitude=0.2))
        bins = range_profile(generate_frame(scene, config, 0), config).bins
        assert int(np.argmax(np.abs(bins))) == 2
        assert abs(bins[2]) == pytest.approx(0.2, abs=2e-3)


class TestDopplerProcess:
    def test_static_target_energy_in_zero_row(self, config):
        # Unwindowed: a static channel is a constant slow-time series, all
        # of whose spectrum sits in the DC bin. The Hann path still peaks
        # there (its +-1-bin sidelobes carry the window's leakage).
        scene = single_target_scene(2.0, velocity=0.0, amplitude=0.5)
        rdm = batch_map(scene, config, window=None, doppler_window=None)
        power = rdm.power()
        zero_row = rdm.zero_velocity_row
        assert np.sum(power[zero_row]) / np.sum(power) > 1 - 1e-12
        assert velocity_axis(config)[zero_row] == 0.0
        hann = batch_map(scene, config)
        assert np.unravel_index(np.argmax(hann.mag_db), hann.shape)[0] == zero_row

    def test_plus_eight_bin_target(self, config):
        # f_d = 2 v / lambda; bin = f_d * M * T. Eight bins up from DC.
        v = 8 * config.velocity_bin_mps
        assert v == pytest.approx(0.2498, abs=2e-4)
        scene = no_leak(single_target_scene(2.0, velocity=v, amplitude=0.5))
        rdm = batch_map(scene, config)
        row, _ = np.unravel_index(np.argmax(rdm.mag_db), rdm.shape)
        assert row == rdm.zero_velocity_row + 8

    def test_aliasing_beyond_vmax(self, config):
        # 0.55 m/s exceeds v_max ~0.5: wraps to 0.55 - lambda/(2T) ~ -0.45.
        v_true = 0.55
        scene = no_leak(single_target_scene(2.0, velocity=v_true, amplitude=0.5))
        rdm = batch_map(scene, config)
        row, col = np.unravel_index(np.argmax(rdm.mag_db), rdm.shape)
        est = refine_peak(rdm, int(col), int(row))
        expected = v_true - config.wavelength_m / (2 * config.frame_interval_s)
        assert expected == pytest.approx(-0.4493, abs=1e-3)
        assert est.velocity_mps == pytest.approx(expected, abs=0.02)

    def test_invariant_to_global_phase(self, config):
        scene = no_leak(single_target_scene(1.5, velocity=0.2, amplitude=0.3))
        profiles = [
            range_profile(generate_frame(scene, config, m), config) for m in range(32)
        ]
        rotated = [
            dataclasses.replace(p, bins=p.bins * np.exp(1j * 0.777)) for p in profiles
        ]
        a = doppler_process(profiles, config)
        b = doppler_process(rotated, config)
        np.testing.assert_allclose(a.mag_db, b.mag_db, atol=1e-9)

    def test_wrong_batch_size_rejected(self, config):
        scene = single_target_scene(1.0)
        profiles = [
            range_profile(generate_frame(scene, config, m), config) for m in range(8)
        ]
        with pytest.raises(ValueError, match="expected 32"):
            doppler_process(profiles, config)

    def test_non_uniform_timestamps_rejected(self, config):
        scene = single_target_scene(1.0)
        profiles = [
            range_profile(generate_frame(scene, config, m), config) for m in range(32)
        ]
        bad = profiles[:16] + [
            dataclasses.replace(p, timestamp=p.timestamp + 0.02) for p in profiles[16:]
        ]
        with pytest.raises(ValueError, match="uniform"):
            doppler_process(bad, config)

    def test_finite_everywhere_for_zero_input(self, config):
        profiles = [
            range_profile(CsiFrame(0.025 * m, m, np.zeros(512, dtype=complex)), config)
            for m in range(32)
        ]
        rdm = doppler_process(profiles, config)
        assert np.all(np.isfinite(rdm.mag_db))

    def test_axes_attached(self, config):
        scene = single_target_scene(1.0)
        rdm = batch_map(scene, config)
        assert rdm.mag_db.shape == (32, config.n_range_bins)
        assert rdm.range_axis.shape[0] == config.n_range_bins
        assert rdm.velocity_axis.shape[0] == 32


class TestRefinePeak:
    def test_symmetric_neighbors_give_bin_center(self):
        assert parabolic_offset(-3.0, 0.0, -3.0) == 0.0

    def test_edge_peak_not_refined(self, config):
        scene = single_target_scene(0.0, amplitude=1.0)  # leak at bin 0
        rdm = batch_map(scene, config)
        est = refine_peak(rdm, 0, rdm.zero_velocity_row)
        assert not est.refined
        assert est.range_m == 0.0

    @pytest.mark.parametrize("r_true", [1.30, 1.50, 1.83, 2.17])
    def test_range_refinement_gesture_mode(self, r_true):
        # Off-grid range sweep, noiseless: refined range within 2 cm.
        config = make_config(mode="gesture")
        scene = no_leak(single_target_scene(r_true, amplitude=0.4))
        rdm = batch_map(scene, config)
        row, col = np.unravel_index(np.argmax(rdm.mag_db), rdm.shape)
        est = refine_peak(rdm, int(col), int(row))
        assert est.refined
        assert est.range_m == pytest.approx(r_true, abs=0.02)

    @pytest.mark.parametrize("v_true", [0.064, 0.100, 0.137])
    def test_velocity_refinement(self, v_true):
        # Doppler sweep, noiseless: refined velocity within 0.003 m/s.
        config = make_config(mode="gesture")
        scene = no_leak(single_target_scene(2.0, velocity=v_true, amplitude=0.4))
        rdm = batch_map(scene, config)
        row, col = np.unravel_index(np.argmax(rdm.mag_db), rdm.shape)
        est = refine_peak(rdm, int(col), int(row))
        # Truth at the batch center: the target moved during integration.
        r_mid = 2.0 + v_true * rdm.batch_timestamp
        assert est.velocity_mps == pytest.approx(v_true, abs=0.003)
        assert est.range_m == pytest.approx(r_mid, abs=0.03)
