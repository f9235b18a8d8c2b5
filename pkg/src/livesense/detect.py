"""Noise-floor estimation, 2-D CA-CFAR detection, and detection extraction.

The cell-averaging CFAR threshold factor alpha = N_t (pfa^(-1/N_t) - 1) is
exact for exponentially distributed cell powers (complex Gaussian noise).
Training windows are clipped at the map edges and alpha is re-derived per
cell from the clipped training count, so near-range cells keep a
calibrated threshold instead of being discarded. The zero-velocity row is
force-masked: only moving targets are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .config import CfarConfig
from .rdmap import RangeDopplerMap, refine_peak

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Detection:
    """One CFAR-confirmed reflection at sub-bin precision."""

    range_m: float
    velocity_mps: float
    snr_db: float
    bin_r: float
    bin_d: float
    timestamp: float
    refined: bool = True


def noise_floor(rdm: RangeDopplerMap) -> float:
    """Robust noise floor in dB: median cell power, zero-velocity row and the
    top 1% of cells excluded, compensated for the exponential median.

    Raises ValueError on an all-zero map (no finite floor exists).
    """
    power = rdm.power()
    rows = np.arange(power.shape[0]) != rdm.zero_velocity_row
    cells = power[rows].ravel()
    if cells.size == 0 or float(np.max(cells)) < 1e-20:
        raise ValueError("all-zero map has no noise floor")
    kept = cells[cells <= np.quantile(cells, 0.99)]
    mean_power = float(np.median(kept)) / np.log(2.0)
    return float(10.0 * np.log10(mean_power))


def cfar_threshold_factor(pfa: float, n_train) -> np.ndarray:
    """CA-CFAR scale factor for the configured false-alarm probability."""
    n_t = np.asarray(n_train, dtype=float)
    return n_t * (pfa ** (-1.0 / n_t) - 1.0)


def cfar_detect(rdm: RangeDopplerMap, params: CfarConfig) -> np.ndarray:
    """Boolean hit mask, same shape as the map (Doppler rows x range bins).

    A cell is a hit iff its linear power exceeds alpha times the mean power
    of its training ring (the window outside the guard box). Edge cells use
    their clipped training count with a per-cell alpha.
    """
    power = rdm.power()
    outer = (2 * (params.guard_d + params.train_d) + 1,
             2 * (params.guard_r + params.train_r) + 1)
    inner = (2 * params.guard_d + 1, 2 * params.guard_r + 1)
    ones = np.ones_like(power)
    sum_outer = signal.convolve2d(power, np.ones(outer), mode="same", boundary="fill")
    sum_inner = signal.convolve2d(power, np.ones(inner), mode="same", boundary="fill")
    cnt_outer = signal.convolve2d(ones, np.ones(outer), mode="same", boundary="fill")
    cnt_inner = signal.convolve2d(ones, np.ones(inner), mode="same", boundary="fill")
    train_sum = sum_outer - sum_inner
    n_train = np.maximum(cnt_outer - cnt_inner, 1.0)
    alpha = cfar_threshold_factor(params.pfa, n_train)
    hits = power > alpha * (train_sum / n_train)
    hits[rdm.zero_velocity_row, :] = False
    return hits


def extract_detections(
    rdm: RangeDopplerMap,
    mask: np.ndarray,
    floor_db: float | None = None,
) -> list[Detection]:
    """One Detection per 8-connected component of hits, at its peak cell,
    refined to sub-bin precision; SNR is peak magnitude over the noise floor."""
    if mask.shape != rdm.mag_db.shape:
        raise ValueError("mask shape does not match map")
    if not np.any(mask):
        return []
    if floor_db is None:
        floor_db = noise_floor(rdm)
    labels, n_components = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    detections = []
    for component in range(1, n_components + 1):
        cells = np.argwhere(labels == component)
        values = rdm.mag_db[cells[:, 0], cells[:, 1]]
        bin_d, bin_r = cells[int(np.argmax(values))]
        est = refine_peak(rdm, int(bin_r), int(bin_d))
        detections.append(
            Detection(
                range_m=est.range_m,
                velocity_mps=est.velocity_mps,
                snr_db=float(rdm.mag_db[bin_d, bin_r] - floor_db),
                bin_r=est.bin_r,
                bin_d=est.bin_d,
                timestamp=rdm.batch_timestamp,
                refined=est.refined,
            )
        )
    detections.sort(key=lambda d: -d.snr_db)
    return detections
