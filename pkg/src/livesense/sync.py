"""Per-frame time/phase alignment against a session reference frame.

Three stages, all unit-modulus multiplications (per-subcarrier magnitudes
are preserved exactly):

1. coarse integer-sample delay via circular cross-correlation of the
   range-domain channel responses,
2. fine fractional delay from a magnitude-weighted straight-line fit of the
   unwrapped differential phase versus subcarrier frequency,
3. scalar phase correction referenced to the dominant Tx-Rx coupling
   (leakage) tap, which pins every frame's leak phase to the reference and
   thereby cancels per-frame common phase offset and residual clock drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SensingConfig, subcarrier_frequencies
from .frames import FLAG_LOW_CONFIDENCE, CsiFrame

MIN_PEAK_RATIO = 1.2  # below this the correlation peak is untrustworthy
LEAK_SEARCH_BINS = 3  # leakage tap must sit in range bins 0..2
LEAK_DOMINANCE = 10 ** (6.0 / 20.0)  # leak tap >= 6 dB above next tap
MAX_BAD_JUMP_FRAC = 0.10  # unwrap failure: >10% of adjacent phase diffs > pi


@dataclass
class SyncDiagnostics:
    last_coarse_delay_samples: int = 0
    last_fine_delay_s: float = 0.0
    corr_peak_ratio: float = float("inf")
    phase_corrected: bool = True


@dataclass
class SyncState:
    """Mutable per-stream alignment state (single-writer)."""

    reference: CsiFrame | None = None
    reference_leak_phase: float = 0.0
    diagnostics: SyncDiagnostics = field(default_factory=SyncDiagnostics)
    low_ratio_streak: int = 0


def estimate_coarse_delay(csi: np.ndarray, ref_csi: np.ndarray) -> tuple[int, float]:
    """Integer-sample delay of ``csi`` relative to ``ref_csi``.

    Maximizes the magnitude of the circular cross-correlation of the
    range-domain responses over all lags; equivalently the inverse DFT of
    csi * conj(ref). Returns (signed lag in samples, peak-to-second-peak
    ratio); lags are reported in [-N/2, N/2].
    """
    if csi.shape != ref_csi.shape:
        raise ValueError("frames must have equal subcarrier count")
    corr = np.abs(np.fft.ifft(csi * np.conj(ref_csi)))
    n = corr.shape[0]
    peak = int(np.argmax(corr))
    keep = np.ones(n, dtype=bool)
    keep[[(peak - 1) % n, peak, (peak + 1) % n]] = False
    second = float(np.max(corr[keep])) if np.any(keep) else 0.0
    ratio = float(corr[peak] / max(second, 1e-300))
    lag = peak if peak <= n // 2 else peak - n
    return lag, ratio


def estimate_fine_delay(
    csi: np.ndarray,
    ref_csi: np.ndarray,
    freqs: np.ndarray,
    bandwidth_hz: float,
) -> tuple[float, bool]:
    """Sub-sample delay from the differential phase slope across subcarriers.

    Fits arg(csi * conj(ref)) versus f_k by magnitude-weighted least
    squares after unwrapping; delay = -slope / (2 pi). Subcarriers below
    10% of the frame's median magnitude are excluded. Returns (delay_s,
    ok); ok is False on unwrap failure or an out-of-range estimate
    (|delay| >= 1/B), in which case delay_s is 0.
    """
    prod = csi * np.conj(ref_csi)
    mag = np.abs(csi)
    floor = 0.1 * np.median(mag)
    if floor <= 0.0:
        return 0.0, False
    use = mag >= floor
    if int(np.count_nonzero(use)) < 8:
        return 0.0, False
    # Rotate the bulk phase to 0 so the +-pi branch cut sits away from the
    # data; otherwise a common phase offset near +-pi makes ordinary noise
    # look like wrap events. The slope is unaffected by the rotation.
    bulk = np.sum(prod[use])
    if bulk != 0:
        prod = prod * (np.conj(bulk) / abs(bulk))
    phase = np.angle(prod[use])
    if np.mean(np.abs(np.diff(phase)) > np.pi) > MAX_BAD_JUMP_FRAC:
        return 0.0, False
    unwrapped = np.unwrap(phase)
    # Fit against normalized frequency for conditioning; rescale after.
    x = freqs[use] / bandwidth_hz
    w = np.sqrt(np.abs(prod[use]))
    if not np.any(w > 0.0):
        return 0.0, False
    try:
        slope_scaled = np.polyfit(x, unwrapped, 1, w=w)[0]
    except np.linalg.LinAlgError:
        return 0.0, False
    delay = -slope_scaled / (2.0 * np.pi * bandwidth_hz)
    if not np.isfinite(delay) or abs(delay) >= 1.0 / bandwidth_hz:
        return 0.0, False
    return float(delay), True


def apply_delay(frame: CsiFrame, delay_s: float, config: SensingConfig) -> CsiFrame:
    """Advance the frame by ``delay_s``: csi[k] *= e^{+j 2 pi f_k delay_s}."""
    if delay_s == 0.0:
        return frame
    if not np.isfinite(delay_s):
        raise ValueError("delay must be finite")
    f_k = subcarrier_frequencies(config)
    return frame.with_csi(frame.csi * np.exp(2j * np.pi * f_k * delay_s))


def leak_tap(csi: np.ndarray) -> tuple[int, float, bool]:
    """Locate the leakage tap in range bins 0..2 of the raw range profile.

    Returns (bin index, phase at the tap, dominant); dominant is False when
    the tap is not at least 6 dB above the strongest tap outside its
    immediate neighborhood.
    """
    h = np.fft.ifft(csi)
    mag = np.abs(h)
    r = int(np.argmax(mag[:LEAK_SEARCH_BINS]))
    n = mag.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[[(r - 1) % n, r, (r + 1) % n]] = False
    next_tap = float(np.max(mag[keep]))
    dominant = mag[r] >= LEAK_DOMINANCE * next_tap
    return r, float(np.angle(h[r])), bool(dominant)


def phase_correct(frame: CsiFrame, state: SyncState) -> CsiFrame:
    """Rotate all subcarriers so the leakage tap phase matches the reference.

    Skipped (frame flagged low-confidence) when no dominant leakage tap is
    present.
    """
    if state.reference is None:
        raise ValueError("sync state has no reference frame")
    _, theta, dominant = leak_tap(frame.csi)
    if not dominant:
        state.diagnostics.phase_corrected = False
        return frame.with_flags(FLAG_LOW_CONFIDENCE)
    state.diagnostics.phase_corrected = True
    rotation = np.exp(-1j * (theta - state.reference_leak_phase))
    return frame.with_csi(frame.csi * rotation)


class Synchronizer:
    """Applies the full coarse -> fine -> phase chain to a frame stream.

    The phase reference (leak-tap phase) is pinned at the first accepted
    frame of the session so slow-time phase stays continuous. The delay
    reference is rolled forward to the latest synced frame once per
    Doppler batch: a moving target's cross-terms bias the fine-delay fit
    in proportion to its displacement from the reference, so keeping the
    reference recent bounds that contamination to one batch's walk. A
    full reset (phase included) happens only when the correlation peak
    ratio stays untrustworthy for 2 * doppler_batch consecutive frames.
    """

    def __init__(self, config: SensingConfig):
        self.config = config
        self.state = SyncState()
        self._freqs = subcarrier_frequencies(config)
        self._frames_since_anchor = 0

    def _adopt_reference(self, frame: CsiFrame) -> None:
        _, theta, _ = leak_tap(frame.csi)
        self.state.reference = frame
        self.state.reference_leak_phase = theta
        self.state.low_ratio_streak = 0
        self.state.diagnostics = SyncDiagnostics()
        self._frames_since_anchor = 0

    def _roll_delay_reference(self, synced: CsiFrame) -> None:
        """Keep the session phase anchor, refresh only the delay target."""
        self.state.reference = synced
        self._frames_since_anchor = 0

    def process(self, frame: CsiFrame) -> CsiFrame:
        state = self.state
        if state.reference is None:
            if not frame.low_confidence:
                self._adopt_reference(frame)
            return frame

        ref = state.reference
        lag, ratio = estimate_coarse_delay(frame.csi, ref.csi)
        diag = state.diagnostics
        diag.corr_peak_ratio = ratio
        flags = 0
        if ratio < MIN_PEAK_RATIO:
            state.low_ratio_streak += 1
            if state.low_ratio_streak >= 2 * self.config.doppler_batch:
                self._adopt_reference(frame)
                return frame
            lag = 0
            flags |= FLAG_LOW_CONFIDENCE
        else:
            state.low_ratio_streak = 0
        diag.last_coarse_delay_samples = lag

        csi = frame.csi
        fs = self.config.bandwidth_hz
        if lag != 0:
            csi = csi * np.exp(2j * np.pi * self._freqs * (lag / fs))
        fine, ok = estimate_fine_delay(csi, ref.csi, self._freqs, fs)
        if not ok:
            flags |= FLAG_LOW_CONFIDENCE
        elif fine != 0.0:
            csi = csi * np.exp(2j * np.pi * self._freqs * fine)
        diag.last_fine_delay_s = fine

        out = CsiFrame(
            timestamp=frame.timestamp,
            seq=frame.seq,
            csi=csi,
            flags=frame.flags | flags,
        )
        out = phase_correct(out, state)
        self._frames_since_anchor += 1
        if (
            self._frames_since_anchor >= self.config.doppler_batch
            and not out.low_confidence
        ):
            self._roll_delay_reference(out)
        return out
