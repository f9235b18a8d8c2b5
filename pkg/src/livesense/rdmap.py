"""The 2-D transform: CSI -> range profile -> range-Doppler map.

Range: Hann window across subcarriers, zero-pad by the mode's factor,
inverse DFT, normalize so a unit-amplitude point target peaks at ~1
regardless of N, zero-padding, or window, then crop to the configured
maximum range. Doppler: Hann window across the M frames of a batch, FFT
per range bin, zero-centered reordering, magnitude in dB.

Efficiency mode decimates subcarriers 4x before the range transform; the
tone span (and therefore the range resolution) is unchanged while the
processing cost and integration gain drop accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SensingConfig, range_axis, velocity_axis
from .frames import CsiFrame

DB_EPSILON = 1e-12  # injected before log so exact-zero cells stay finite


@dataclass(frozen=True)
class RangeProfile:
    """Complex range response of one frame, cropped to max_range_m."""

    bins: np.ndarray
    timestamp: float
    seq: int


@dataclass(frozen=True)
class RangeDopplerMap:
    """M x R magnitude map (dB) with physical axes attached."""

    mag_db: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray
    batch_seq: int
    batch_timestamp: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.mag_db.shape

    @property
    def zero_velocity_row(self) -> int:
        return self.mag_db.shape[0] // 2

    def power(self) -> np.ndarray:
        """Linear power per cell (|amplitude|^2)."""
        return 10.0 ** (self.mag_db / 10.0)


@dataclass(frozen=True)
class PeakEstimate:
    range_m: float
    velocity_mps: float
    bin_r: float
    bin_d: float
    refined: bool


def _window(n: int, kind: str | None) -> np.ndarray:
    if kind is None:
        return np.ones(n)
    if kind == "hann":
        return np.hanning(n)
    raise ValueError(f"unknown window {kind!r}")


def range_profile(
    frame: CsiFrame, config: SensingConfig, window: str | None = "hann"
) -> RangeProfile:
    """Transform one synchronized, clutter-subtracted frame to range bins."""
    csi = frame.csi
    decim = config.decimation
    if decim > 1:
        csi = csi[::decim]
    n_used = csi.shape[0]
    w = _window(n_used, window)
    n_fft = n_used * config.effective_zero_pad
    bins = np.fft.ifft(w * csi, n_fft) * (n_fft / np.sum(w))
    return RangeProfile(
        bins=bins[: config.n_range_bins], timestamp=frame.timestamp, seq=frame.seq
    )


def doppler_process(
    profiles: Sequence[RangeProfile],
    config: SensingConfig,
    batch_seq: int = 0,
    window: str | None = "hann",
) -> RangeDopplerMap:
    """Slow-time FFT across a batch of M range profiles.

    Rows are reordered zero-centered so row i corresponds to
    velocity_axis(config)[i]; positive velocity means increasing range.
    """
    m = config.doppler_batch
    if len(profiles) != m:
        raise ValueError(f"expected {m} profiles, got {len(profiles)}")
    times = np.array([p.timestamp for p in profiles])
    dt = np.diff(times)
    if np.any(np.abs(dt - config.frame_interval_s) > 0.5 * config.frame_interval_s):
        raise ValueError("batch timestamps are not uniform at the frame interval")
    stack = np.asarray([p.bins for p in profiles])
    w = _window(m, window)
    # Conjugate-exponent transform: a target receding at +v has slow-time
    # phase e^{-j 2 pi (2v/lambda) T m} and must land at the +v bin.
    spectrum = np.fft.ifft(stack * w[:, None], axis=0) * (m / np.sum(w))
    spectrum = np.fft.fftshift(spectrum, axes=0)
    mag_db = 20.0 * np.log10(np.abs(spectrum) + DB_EPSILON)
    return RangeDopplerMap(
        mag_db=mag_db,
        range_axis=range_axis(config),
        velocity_axis=velocity_axis(config),
        batch_seq=batch_seq,
        batch_timestamp=float(np.mean(times)),
    )


def parabolic_offset(left: float, center: float, right: float) -> float:
    """Vertex offset in [-0.5, 0.5] of the parabola through three samples.

    Symmetric neighbors give 0; a degenerate (flat) triple also gives 0.
    """
    denom = left + right - 2.0 * center
    if denom >= 0.0 or not np.isfinite(denom):
        return 0.0  # not a strict local max (or flat/inf): stay on the bin
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))


def refine_peak(rdm: RangeDopplerMap, bin_r: int, bin_d: int) -> PeakEstimate:
    """Sub-bin peak localization by independent three-point quadratic
    interpolation of the log magnitude in range and Doppler.

    A peak on the map edge is returned unrefined at the bin center.
    """
    n_d, n_r = rdm.mag_db.shape
    refined = 0 < bin_r < n_r - 1 and 0 < bin_d < n_d - 1
    dr = dd = 0.0
    if refined:
        row = rdm.mag_db[bin_d]
        col = rdm.mag_db[:, bin_r]
        dr = parabolic_offset(row[bin_r - 1], row[bin_r], row[bin_r + 1])
        dd = parabolic_offset(col[bin_d - 1], col[bin_d], col[bin_d + 1])
    r_spacing = rdm.range_axis[1] - rdm.range_axis[0] if len(rdm.range_axis) > 1 else 0.0
    v_spacing = (
        rdm.velocity_axis[1] - rdm.velocity_axis[0] if len(rdm.velocity_axis) > 1 else 0.0
    )
    frac_r = bin_r + dr
    frac_d = bin_d + dd
    return PeakEstimate(
        range_m=float(rdm.range_axis[0] + frac_r * r_spacing),
        velocity_mps=float(rdm.velocity_axis[0] + frac_d * v_spacing),
        bin_r=float(frac_r),
        bin_d=float(frac_d),
        refined=refined,
    )
