"""End-to-end orchestration: resampling, buffering, batch processing.

Frames from any source (simulator, trace file, UDP) are snapped onto a
uniform slow-time grid, buffered in a bounded ring (capacity
buffer_factor * M, oldest dropped under backpressure), and consumed in
disjoint M-frame batches: sync -> background subtraction -> range profile
per frame, then Doppler FFT -> CFAR -> detections -> tracks -> vitals.

Config patches are validated immediately but applied atomically at the
next batch boundary; every BatchResult carries the config_id it was
produced under. Given the same input frames and config, the emitted
BatchResult stream is bit-identical across runs (wall-clock timings
excluded).
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .clutter import BackgroundEstimator
from .config import ConfigError, SensingConfig, apply_patch
from .detect import Detection, cfar_detect, extract_detections, noise_floor
from .frames import FLAG_GAP_FILLED, CsiFrame
from .rdmap import RangeDopplerMap, doppler_process, range_profile
from .sync import Synchronizer
from .tracking import Tracker, TrackView
from .vitals import VitalsEstimate, vitals_estimate


class StreamDegraded(RuntimeError):
    """More than the allowed number of consecutive grid slots went unfilled."""


MAX_CONSECUTIVE_GAP_FILLS = 4


class GridResampler:
    """Snap a monotonic, possibly jittered/lossy frame stream onto the
    nominal n*T grid ("active packet injection" policy).

    Each output slot takes the nearest input frame within +-T/2 of its
    nominal time; empty slots repeat the previous output flagged
    gap_filled. More than MAX_CONSECUTIVE_GAP_FILLS consecutive empty
    slots degrade the stream: pending state is discarded and the grid
    re-anchors at the next input frame.
    """

    def __init__(self, frame_interval_s: float):
        self.interval = frame_interval_s
        self.degraded_count = 0
        self._anchor: float | None = None
        self._next_slot = 0
        self._out_seq = 0
        self._best: dict[int, tuple[float, CsiFrame]] = {}
        self._last_csi: np.ndarray | None = None
        self._last_flags = 0
        self._gap_streak = 0
        self._last_ts = -np.inf

    def push(self, frame: CsiFrame) -> list[CsiFrame]:
        """Ingest one frame; returns grid frames that became final."""
        if frame.timestamp <= self._last_ts:
            raise ValueError("timestamps must be strictly monotonic")
        self._last_ts = frame.timestamp
        if self._anchor is None:
            self._anchor = frame.timestamp
        slot = int(round((frame.timestamp - self._anchor) / self.interval))
        emitted = self._emit_through(slot, re_anchor_frame=frame)
        if self._anchor is None:  # degraded inside _emit_through: re-anchor
            self._anchor = frame.timestamp
            slot = 0
        nominal = self._anchor + slot * self.interval
        dist = abs(frame.timestamp - nominal)
        best = self._best.get(slot)
        if best is None or dist < best[0]:
            self._best[slot] = (dist, frame)
        return emitted

    def flush(self) -> list[CsiFrame]:
        """Finalize all pending slots (end of stream)."""
        if not self._best:
            return []
        return self._emit_through(max(self._best) + 1, re_anchor_frame=None)

    def _emit_through(self, upto_slot: int, re_anchor_frame) -> list[CsiFrame]:
        out: list[CsiFrame] = []
        for n in range(self._next_slot, upto_slot):
            nominal = self._anchor + n * self.interval
            entry = self._best.pop(n, None)
            if entry is not None:
                _, frame = entry
                self._gap_streak = 0
                self._last_csi = frame.csi
                self._last_flags = frame.flags
                out.append(
                    CsiFrame(
                        timestamp=nominal,
                        seq=self._out_seq,
                        csi=frame.csi,
                        flags=frame.flags,
                    )
                )
            else:
                self._gap_streak += 1
                if self._gap_streak > MAX_CONSECUTIVE_GAP_FILLS:
                    self._degrade()
                    return out
                out.append(
                    CsiFrame(
                        timestamp=nominal,
                        seq=self._out_seq,
                        csi=self._last_csi,
                        flags=self._last_flags | FLAG_GAP_FILLED,
                    )
                )
            self._out_seq += 1
            self._next_slot = n + 1
        return out

    def _degrade(self) -> None:
        self.degraded_count += 1
        self._best.clear()
        self._anchor = None
        self._next_slot = 0
        self._gap_streak = 0


class FrameBuffer:
    """Bounded frame ring; never blocks ingestion, drops oldest when full."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.dropped = 0
        self._frames: deque[CsiFrame] = deque()

    def __len__(self) -> int:
        return len(self._frames)

    def push(self, frame: CsiFrame) -> None:
        if len(self._frames) >= self.capacity:
            self._frames.popleft()
            self.dropped += 1
        self._frames.append(frame)

    def take_batch(self, m: int) -> list[CsiFrame] | None:
        if len(self._frames) < m:
            return None
        return [self._frames.popleft() for _ in range(m)]

    def clear(self) -> None:
        self._frames.clear()


@dataclass(frozen=True)
class Timings:
    ingest_ms: float
    sync_ms: float
    sic_ms: float
    fft_ms: float
    detect_ms: float
    total_ms: float


@dataclass(frozen=True)
class BatchResult:
    map: RangeDopplerMap
    detections: tuple[Detection, ...]
    tracks: tuple[TrackView, ...]
    vitals: VitalsEstimate | None
    timings: Timings
    config_id: int
    drop_count: int  # cumulative backpressure drops
    degraded_count: int  # cumulative resampler resync events
    gap_filled: int  # gap-filled frames in this batch
    low_confidence: int  # low-confidence sync frames in this batch


def batch_fingerprint(result: BatchResult) -> str:
    """Content hash of a BatchResult excluding wall-clock timings."""
    h = hashlib.sha256()
    h.update(result.map.mag_db.tobytes())
    h.update(result.map.range_axis.tobytes())
    h.update(result.map.velocity_axis.tobytes())
    h.update(np.float64(result.map.batch_timestamp).tobytes())
    for det in result.detections:
        h.update(
            repr(
                (
                    det.range_m,
                    det.velocity_mps,
                    det.snr_db,
                    det.bin_r,
                    det.bin_d,
                    det.timestamp,
                    det.refined,
                )
            ).encode()
        )
    for track in result.tracks:
        h.update(repr(dataclasses.astuple(track)).encode())
    if result.vitals is not None:
        h.update(repr(dataclasses.astuple(result.vitals)).encode())
    h.update(
        repr(
            (
                result.config_id,
                result.drop_count,
                result.degraded_count,
                result.gap_filled,
                result.low_confidence,
            )
        ).encode()
    )
    return h.hexdigest()


class Pipeline:
    """Single-stream processing state machine (one writer).

    push_frame() ingests raw frames; process_available() emits every batch
    that is ready. Both never raise for in-band data problems; stage flags
    and degrade events surface in the BatchResult diagnostics.
    """

    def __init__(self, config: SensingConfig):
        self.config = config
        self.config_id = 0
        self._staged_config = config
        self._staged_id = 0
        self._pending: deque[tuple[int, SensingConfig]] = deque()
        self.batch_seq = 0
        self.frames_ingested = 0
        self._ingest_s = 0.0
        self._resampler = GridResampler(config.frame_interval_s)
        self._buffer = FrameBuffer(config.buffer_capacity)
        self._sync = Synchronizer(config)
        self._background = BackgroundEstimator(config)
        self._tracker = Tracker()
        self._vitals_ring: deque[np.ndarray] = deque(maxlen=config.vitals.window_frames)
        self._vitals_config = self._make_vitals_config(config)

    # -- configuration ------------------------------------------------------

    @staticmethod
    def _make_vitals_config(config: SensingConfig) -> SensingConfig:
        # Vitals candidates live on the unpadded (coarse) range grid.
        return dataclasses.replace(config, zero_pad_factor=1)

    def apply_config_patch(self, patch: dict) -> int:
        """Validate and stage a patch; returns the config_id subsequent
        batches will carry. Invalid patches raise ConfigError and leave the
        pipeline unchanged; an empty patch is a no-op."""
        if not patch:
            return self._staged_id
        new_config = apply_patch(self._staged_config, patch)
        self._staged_config = new_config
        self._staged_id += 1
        self._pending.append((self._staged_id, new_config))
        return self._staged_id

    def set_mode(self, mode: str) -> int:
        return self.apply_config_patch({"mode": mode})

    def _apply_pending(self) -> None:
        while self._pending:
            new_id, new_config = self._pending.popleft()
            old = self.config
            self.config = new_config
            self.config_id = new_id
            if new_config.sic != old.sic:
                self._background = BackgroundEstimator(new_config)
            if new_config.buffer_factor != old.buffer_factor:
                rebuilt = FrameBuffer(new_config.buffer_capacity)
                rebuilt.dropped = self._buffer.dropped
                for frame in list(self._buffer._frames)[-new_config.buffer_capacity :]:
                    rebuilt._frames.append(frame)
                self._buffer = rebuilt
            if new_config.vitals.window_frames != old.vitals.window_frames:
                self._vitals_ring = deque(
                    self._vitals_ring, maxlen=new_config.vitals.window_frames
                )
            new_vitals_config = self._make_vitals_config(new_config)
            if new_vitals_config.n_range_bins != self._vitals_config.n_range_bins:
                self._vitals_ring.clear()
            self._vitals_config = new_vitals_config

    # -- ingestion ----------------------------------------------------------

    def push_frame(self, frame: CsiFrame) -> None:
        if frame.n_subcarriers != self.config.n_subcarriers:
            raise ValueError(
                f"frame has {frame.n_subcarriers} subcarriers, "
                f"session is configured for {self.config.n_subcarriers}"
            )
        t0 = time.perf_counter()
        before = self._resampler.degraded_count
        try:
            resampled = self._resampler.push(frame)
        except ValueError:
            # Non-monotonic input: drop the frame rather than kill the stream.
            self._ingest_s += time.perf_counter() - t0
            return
        if self._resampler.degraded_count != before:
            self._buffer.clear()
        else:
            for out in resampled:
                self._buffer.push(out)
        self.frames_ingested += 1
        self._ingest_s += time.perf_counter() - t0

    def flush_source(self) -> None:
        """Finalize pending resampler slots (end of a finite source)."""
        for out in self._resampler.flush():
            self._buffer.push(out)

    # -- processing ---------------------------------------------------------

    def process_available(self) -> list[BatchResult]:
        results = []
        while len(self._buffer) >= self.config.doppler_batch:
            self._apply_pending()
            frames = self._buffer.take_batch(self.config.doppler_batch)
            if frames is None:
                break
            results.append(self._process_batch(frames))
        return results

    def _process_batch(self, frames: list[CsiFrame]) -> BatchResult:
        t_start = time.perf_counter()
        config = self.config

        synced = [self._sync.process(frame) for frame in frames]
        t_sync = time.perf_counter()

        cleaned = []
        for frame in synced:
            cleaned.append(self._background.subtract(frame))
            self._background.update(frame)
            self._vitals_ring.append(
                range_profile(frame, self._vitals_config).bins
            )
        t_sic = time.perf_counter()

        profiles = [range_profile(frame, config) for frame in cleaned]
        rdm = doppler_process(profiles, config, batch_seq=self.batch_seq)
        t_fft = time.perf_counter()

        try:
            floor_db = noise_floor(rdm)
        except ValueError:
            floor_db = None
        if floor_db is not None:
            mask = cfar_detect(rdm, config.cfar)
            detections = extract_detections(rdm, mask, floor_db)
        else:
            detections = []
        tracks = self._tracker.update(detections, rdm.batch_timestamp, config.track)
        vitals = self._estimate_vitals()
        t_detect = time.perf_counter()

        self.batch_seq += 1
        timings = Timings(
            ingest_ms=self._ingest_s * 1e3,
            sync_ms=(t_sync - t_start) * 1e3,
            sic_ms=(t_sic - t_sync) * 1e3,
            fft_ms=(t_fft - t_sic) * 1e3,
            detect_ms=(t_detect - t_fft) * 1e3,
            total_ms=(t_detect - t_start) * 1e3 + self._ingest_s * 1e3,
        )
        self._ingest_s = 0.0
        return BatchResult(
            map=rdm,
            detections=tuple(detections),
            tracks=tracks,
            vitals=vitals,
            timings=timings,
            config_id=self.config_id,
            drop_count=self._buffer.dropped,
            degraded_count=self._resampler.degraded_count,
            gap_filled=sum(1 for f in frames if f.gap_filled),
            low_confidence=sum(1 for f in synced if f.low_confidence),
        )

    def _estimate_vitals(self) -> VitalsEstimate | None:
        window = self.config.vitals.window_frames
        if len(self._vitals_ring) < window:
            return None
        stack = np.asarray(self._vitals_ring)
        centered = stack - np.mean(stack, axis=0)
        variance = np.mean(np.abs(centered) ** 2, axis=0)
        candidates = np.argsort(variance)[::-1][:3]
        best: VitalsEstimate | None = None
        for bin_idx in sorted(int(b) for b in candidates):
            estimate = vitals_estimate(
                centered[:, bin_idx], self.config, range_bin=bin_idx
            )
            if estimate is not None and (
                best is None or estimate.confidence_db > best.confidence_db
            ):
                best = estimate
        return best

    # -- convenience --------------------------------------------------------

    def run_trace(self, frames) -> list[BatchResult]:
        """Offline helper: push every frame, flush, return all batches."""
        results: list[BatchResult] = []
        for frame in frames:
            self.push_frame(frame)
            results.extend(self.process_available())
        self.flush_source()
        results.extend(self.process_available())
        return results
