"""Micro-motion (breathing-scale) rate estimation and presence decisions.

A sub-resolution periodic displacement shows up as a slow phase modulation
of the slow-time series at the target's range bin: a displacement of A
metres swings the phase by 4 pi A / lambda radians. The estimator
phase-extracts the series, unwraps, removes any linear trend (constant
offsets and slow drift cancel), and reads the rate off the strongest
sufficiently prominent spectral peak inside the configured band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SensingConfig

MAX_BAD_JUMP_FRAC = 0.10  # unwrap failure heuristic, as in sync
_FFT_PAD = 4  # finer rate grid than 1/window
_MIN_PEAK_POWER = 1e-12  # below this the spectrum is numerical residue
_DOMINANCE_MARGIN_DB = 10.0  # in-band peak must be near the global motion peak


@dataclass(frozen=True)
class VitalsEstimate:
    rate_hz: float
    confidence_db: float  # spectral prominence over the in-band median
    window_span_s: float
    range_bin: int


@dataclass(frozen=True)
class PresenceDecision:
    present: bool
    score: float
    source: str  # "track" | "vitals" | "none"


def vitals_estimate(
    series: np.ndarray, config: SensingConfig, range_bin: int = 0
) -> VitalsEstimate | None:
    """Estimate a periodic rate from a complex slow-time series at one bin.

    Returns None when the phase cannot be unwrapped reliably or no peak in
    the configured band is prominent enough.
    """
    vit = config.vitals
    series = np.asarray(series)
    if series.shape[0] < vit.window_frames:
        raise ValueError(
            f"series must hold >= {vit.window_frames} frames, got {series.shape[0]}"
        )
    # Rotate the bulk phase to 0 first so a pedestal near +-pi does not put
    # the branch cut inside the oscillation (rate and trend are unaffected).
    bulk = np.sum(series)
    if bulk != 0:
        series = series * (np.conj(bulk) / abs(bulk))
    phase = np.angle(series)
    if np.mean(np.abs(np.diff(phase)) > np.pi) > MAX_BAD_JUMP_FRAC:
        return None  # unwrap would alias; bin is noise-dominated
    unwrapped = np.unwrap(phase)
    t = np.arange(unwrapped.shape[0]) * config.frame_interval_s
    trend = np.polyfit(t, unwrapped, 1)
    detrended = unwrapped - np.polyval(trend, t)

    n = detrended.shape[0]
    spectrum = np.abs(np.fft.rfft(detrended * np.hanning(n), n * _FFT_PAD)) ** 2
    freqs = np.fft.rfftfreq(n * _FFT_PAD, d=config.frame_interval_s)
    lo, hi = vit.band_hz
    band = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if band.size < 3:
        return None
    band_power = spectrum[band]
    median = float(np.median(band_power))
    peak_local = int(np.argmax(band_power))
    peak = band[peak_local]
    if band_power[peak_local] <= _MIN_PEAK_POWER or median <= 0.0:
        return None
    prominence = 10.0 * np.log10(band_power[peak_local] / median)
    if prominence < vit.prominence_db:
        return None
    # The in-band peak must be the dominant motion component: a strong
    # out-of-band mover leaks a sloped skirt into the band that would
    # otherwise pass the prominence test.
    above_lo = spectrum[freqs >= lo]
    global_peak = float(np.max(above_lo))
    if band_power[peak_local] < global_peak * 10 ** (-_DOMINANCE_MARGIN_DB / 10.0):
        return None

    # Parabolic refinement of the peak on log power; the reported rate
    # stays inside the configured band even for a band-edge peak.
    rate = freqs[peak]
    if 0 < peak < spectrum.shape[0] - 1:
        logp = np.log(spectrum[peak - 1 : peak + 2] + 1e-300)
        denom = logp[0] + logp[2] - 2.0 * logp[1]
        if denom < 0:
            rate += 0.5 * (logp[0] - logp[2]) / denom * (freqs[1] - freqs[0])
    return VitalsEstimate(
        rate_hz=float(np.clip(rate, lo, hi)),
        confidence_db=float(prominence),
        window_span_s=float(n * config.frame_interval_s),
        range_bin=range_bin,
    )


def presence_decision(batches) -> PresenceDecision:
    """Presence over a window of batch results: a confirmed track or a
    vitals estimate at any candidate bin counts as present."""
    best_track = None
    best_vitals = None
    for batch in batches:
        for track in batch.tracks:
            if track.state == "confirmed":
                if best_track is None or track.snr_db > best_track:
                    best_track = track.snr_db
        if batch.vitals is not None:
            conf = batch.vitals.confidence_db
            if best_vitals is None or conf > best_vitals:
                best_vitals = conf
    if best_track is not None and (best_vitals is None or best_track >= best_vitals):
        return PresenceDecision(True, best_track, "track")
    if best_vitals is not None:
        return PresenceDecision(True, best_vitals, "vitals")
    return PresenceDecision(False, 0.0, "none")
