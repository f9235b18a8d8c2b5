"""Sync chain: coarse/fine delay estimation, delay application, phase lock."""

import dataclasses

import numpy as np
import pytest

from livesense import (
    CsiFrame,
    Scene,
    SensingConfig,
    Synchronizer,
    apply_delay,
    generate_frame,
    phase_correct,
    range_profile,
    subcarrier_frequencies,
)
from livesense.sync import SyncState, estimate_coarse_delay, estimate_fine_delay, leak_tap

from conftest import clean_impairments, make_config, single_target_scene


def delayed(csi: np.ndarray, delay_s: float, config: SensingConfig) -> np.ndarray:
    """Apply a true delay (the thing the sync chain must undo)."""
    f_k = subcarrier_frequencies(config)
    return csi * np.exp(-2j * np.pi * f_k * delay_s)


def brute_force_coarse(csi: np.ndarray, ref: np.ndarray) -> int:
    """Oracle: explicit circular correlation over every lag."""
    h = np.fft.ifft(csi)
    href = np.fft.ifft(ref)
    n = len(h)
    scores = [abs(np.sum(h * np.conj(np.roll(href, lag)))) for lag in range(n)]
    peak = int(np.argmax(scores))
    return peak if peak <= n // 2 else peak - n


def leak_frame(config: SensingConfig, seed: int = 0, noise: float = 0.0) -> np.ndarray:
    scene = Scene(impairments=clean_impairments(noise_power=noise), rng_seed=seed)
    return generate_frame(scene, config, 0).csi


class TestCoarseDelay:
    def test_zero_for_identical(self, config):
        csi = leak_frame(config)
        lag, ratio = estimate_coarse_delay(csi, csi)
        assert lag == 0
        assert ratio >= 1.0

    def test_three_sample_delay_matches_brute_force(self, config):
        rng = np.random.default_rng(0)
        ref = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        frame = delayed(ref, 3.0 / config.bandwidth_hz, config)
        lag, _ = estimate_coarse_delay(frame, ref)
        assert lag == 3
        assert brute_force_coarse(frame, ref) == 3

    @pytest.mark.parametrize("shift", [-128, -17, -1, 1, 5, 64, 128])
    def test_shift_inverse_property(self, config, shift):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        shifted = delayed(x, shift / config.bandwidth_hz, config)
        lag, _ = estimate_coarse_delay(x, shifted)
        assert lag + shift == 0

    def test_independent_noise_gives_low_ratio(self, config):
        rng = np.random.default_rng(2)
        low = 0
        trials = 40
        for _ in range(trials):
            a = rng.standard_normal(512) + 1j * rng.standard_normal(512)
            b = rng.standard_normal(512) + 1j * rng.standard_normal(512)
            _, ratio = estimate_coarse_delay(a, b)
            if ratio < 1.2:
                low += 1
        assert low >= 0.9 * trials


class TestFineDelay:
    def test_zero_for_identical(self, config):
        csi = leak_frame(config)
        f_k = subcarrier_frequencies(config)
        delay, ok = estimate_fine_delay(csi, csi, f_k, config.bandwidth_hz)
        assert ok
        assert abs(delay) < 1e-18

    def test_noiseless_exact_inversion(self, config):
        # -1.0 ns applied -> recovered to 1e-6 ns.
        ref = leak_frame(config)
        frame = delayed(ref, -1.0e-9, config)
        f_k = subcarrier_frequencies(config)
        delay, ok = estimate_fine_delay(frame, ref, f_k, config.bandwidth_hz)
        assert ok
        assert delay == pytest.approx(-1.0e-9, abs=1e-15)

    def test_half_sample_at_30db(self, config):
        # Monte Carlo against the injected truth: 3.125 ns +- 0.1 ns.
        truth = 3.125e-9
        f_k = subcarrier_frequencies(config)
        ref = leak_frame(config)
        rng = np.random.default_rng(3)
        sigma = np.sqrt(10 ** (-30 / 10) / 2)  # 30 dB per-subcarrier SNR
        for _ in range(20):
            noise = sigma * (rng.standard_normal(512) + 1j * rng.standard_normal(512))
            frame = delayed(ref, truth, config) + noise
            delay, ok = estimate_fine_delay(frame, ref, f_k, config.bandwidth_hz)
            assert ok
            assert delay == pytest.approx(truth, abs=0.1e-9)

    def test_noise_dominated_flags_unwrap_failure(self, config):
        rng = np.random.default_rng(4)
        a = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        b = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        f_k = subcarrier_frequencies(config)
        delay, ok = estimate_fine_delay(a, b, f_k, config.bandwidth_hz)
        assert not ok
        assert delay == 0.0


class TestApplyDelay:
    def test_zero_is_identity(self, config):
        frame = CsiFrame(0.0, 0, leak_frame(config))
        assert apply_delay(frame, 0.0, config) is frame

    def test_inverse_pair(self, config):
        frame = CsiFrame(0.0, 0, leak_frame(config, noise=0.1, seed=5))
        d = 2.7e-9
        back = apply_delay(apply_delay(frame, d, config), -d, config)
        np.testing.assert_allclose(back.csi, frame.csi, rtol=1e-12)

    def test_one_sample_shifts_profile_peak_by_one_bin(self):
        # DFT shift theorem: 6.25 ns at 160 MHz is exactly one range bin.
        config = make_config(zero_pad_factor=1, max_range_m=100.0)
        scene = single_target_scene(10 * config.range_bin_m, amplitude=1.0)
        scene = dataclasses.replace(
            scene, impairments=clean_impairments(leakage=dataclasses.replace(scene.impairments.leakage, amplitude=0.0))
        )
        frame = generate_frame(scene, config, 0)
        before = np.argmax(np.abs(range_profile(frame, config, window=None).bins))
        shifted = apply_delay(frame, 6.25e-9, config)
        after = np.argmax(np.abs(range_profile(shifted, config, window=None).bins))
        # apply_delay advances the frame: the echo appears one bin closer.
        assert before - after == 1

    def test_preserves_magnitude(self, config):
        frame = CsiFrame(0.0, 0, leak_frame(config, noise=0.5, seed=6))
        out = apply_delay(frame, 1.3e-9, config)
        np.testing.assert_allclose(np.abs(out.csi), np.abs(frame.csi), rtol=1e-13)


class TestPhaseCorrect:
    def test_common_phase_removed_exactly(self, config):
        ref = CsiFrame(0.0, 0, leak_frame(config))
        state = SyncState(reference=ref, reference_leak_phase=leak_tap(ref.csi)[1])
        rotated = CsiFrame(0.025, 1, ref.csi * np.exp(1j * 1.234))
        out = phase_correct(rotated, state)
        np.testing.assert_allclose(out.csi, ref.csi, atol=1e-9)

    def test_zero_phase_is_identity(self, config):
        ref = CsiFrame(0.0, 0, leak_frame(config))
        state = SyncState(reference=ref, reference_leak_phase=leak_tap(ref.csi)[1])
        out = phase_correct(ref, state)
        np.testing.assert_allclose(out.csi, ref.csi, rtol=1e-12)

    def test_no_dominant_leak_flags_and_skips(self, config):
        rng = np.random.default_rng(7)
        noise_csi = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        ref = CsiFrame(0.0, 0, leak_frame(config))
        state = SyncState(reference=ref, reference_leak_phase=0.0)
        frame = CsiFrame(0.025, 1, noise_csi)
        out = phase_correct(frame, state)
        assert out.low_confidence
        np.testing.assert_array_equal(out.csi, noise_csi)

    def test_cpo_variance_after_correction(self, config):
        # 32 static frames with random per-frame CPO: residual slow-time
        # phase variance at the leakage bin < 1e-6 rad^2.
        scene = Scene(impairments=clean_impairments(cpo=True), rng_seed=8)
        sync = Synchronizer(config)
        phases = []
        for m in range(32):
            out = sync.process(generate_frame(scene, config, m))
            phases.append(np.angle(np.fft.ifft(out.csi)[0]))
        phases = np.unwrap(np.asarray(phases))
        assert np.var(phases) < 1e-6


class TestFullChain:
    def test_composition_recovers_reference(self, config):
        # ref * e^{j phi} * e^{-j 2 pi f_k delta}, |delta| < 1/(2B):
        # coarse -> fine -> apply -> phase_correct recovers ref to -60 dB.
        ref_csi = leak_frame(config)
        sync = Synchronizer(config)
        sync.process(CsiFrame(0.0, 0, ref_csi))
        rng = np.random.default_rng(9)
        for i in range(5):
            phi = rng.uniform(-np.pi, np.pi)
            delta = rng.uniform(-0.5, 0.5) / config.bandwidth_hz
            csi = delayed(ref_csi * np.exp(1j * phi), delta, config)
            out = sync.process(CsiFrame(0.025 * (i + 1), i + 1, csi))
            residual = np.sum(np.abs(out.csi - ref_csi) ** 2) / np.sum(np.abs(ref_csi) ** 2)
            assert residual < 1e-6

    def test_magnitude_preserved_through_chain(self, config):
        scene = single_target_scene(1.5, velocity=0.2, amplitude=0.1, cpo=True, sfo_ppm=20.0)
        sync = Synchronizer(config)
        for m in range(8):
            frame = generate_frame(scene, config, m)
            out = sync.process(frame)
            np.testing.assert_allclose(np.abs(out.csi), np.abs(frame.csi), rtol=1e-10)

    def test_static_scene_energy_concentrates_at_zero_doppler(self, config):
        # The calibration-free property: with per-frame CPO and 20 ppm SFO,
        # the leak bin's slow-time energy lands >= 90% in the DC bin after
        # sync, < 50% before.
        scene = Scene(
            impairments=clean_impairments(cpo=True, sfo_ppm=20.0), rng_seed=10
        )
        raw = [generate_frame(scene, config, m) for m in range(32)]
        sync = Synchronizer(config)
        synced = [sync.process(f) for f in raw]

        def dc_fraction(frames):
            series = np.array([np.fft.ifft(f.csi)[0] for f in frames])
            spectrum = np.abs(np.fft.fft(series)) ** 2
            return spectrum[0] / np.sum(spectrum)

        assert dc_fraction(raw) < 0.5
        assert dc_fraction(synced) >= 0.9

    def test_reanchor_after_persistent_low_confidence(self):
        config = make_config(doppler_batch=8)  # re-anchor threshold 16 frames
        sync = Synchronizer(config)
        good = Scene(impairments=clean_impairments(), rng_seed=11)
        sync.process(generate_frame(good, config, 0))
        # Zero frames always fail the peak-ratio test (consecutive streak).
        dead = np.zeros(512, dtype=complex)
        for i in range(15):
            out = sync.process(CsiFrame(0.025 * (i + 1), i + 1, dead))
            assert out.low_confidence
        assert sync.state.reference.seq == 0  # one short of the threshold
        sync.process(CsiFrame(0.025 * 16, 16, dead))
        # The 16th consecutive low-confidence frame became the new reference.
        assert sync.state.reference.seq == 16
