"""Threaded runtime around the pipeline: sources, processing loop, fan-out.

Three-stage contract: a source thread produces raw frames, the processing
thread owns the pipeline (resampling, batching, DSP) and publishes results,
and any number of output subscribers each receive every published message
through bounded per-subscriber queues. Slow subscribers are disconnected
rather than ever blocking processing. Config changes are staged through
the pipeline's control queue and take effect at batch boundaries.
"""

from __future__ import annotations

import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import SensingConfig, config_to_dict, range_axis, velocity_axis
from .frames import CsiFrame
from .pipeline import BatchResult, Pipeline
from .simulator import Scene, generate_frame, frame_dropped
from .tracefile import TraceWriter, decode_frame_payload
from .vitals import presence_decision

RDM_MIN_INTERVAL_S = 0.1  # rdm/csi_stats streams limited to <= 10 msgs/s
SUBSCRIBER_QUEUE_LIMIT = 256
ALL_CHANNELS = frozenset({"rdm", "targets", "tracks", "vitals", "stats", "csi_stats"})
_FRAME_META_SIZE = 13  # f64 timestamp + u32 seq + u8 flags


@dataclass
class Subscriber:
    deliver: Callable[[dict], None]  # called from the processing thread; must not block
    channels: set = field(default_factory=lambda: set(ALL_CHANNELS))
    alive: bool = True


class Broadcaster:
    """Thread-safe fan-out of JSON-ready messages to subscribers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subscribers: list[Subscriber] = []

    def register(self, deliver, channels=None) -> Subscriber:
        sub = Subscriber(deliver=deliver)
        if channels is not None:
            sub.channels = set(channels)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unregister(self, sub: Subscriber) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def publish(self, channel: str, message: dict) -> None:
        with self._lock:
            subs = list(self._subscribers)
        for sub in subs:
            if not sub.alive or channel not in sub.channels:
                continue
            try:
                sub.deliver(message)
            except Exception:
                sub.alive = False


class PipelineService:
    """Owns the pipeline plus its source and processing threads."""

    def __init__(
        self,
        config: SensingConfig,
        source: "FrameSource",
        record_writer: TraceWriter | None = None,
        presence_window: int = 8,
    ):
        self.config = config
        self.pipeline = Pipeline(config)
        self.source = source
        self.broadcaster = Broadcaster()
        self.batches: deque[BatchResult] = deque(maxlen=presence_window)
        self._record = record_writer
        self._lock = threading.RLock()
        self._ingest: deque[CsiFrame] = deque(maxlen=4 * config.buffer_capacity)
        self._wake = threading.Event()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._last_rdm_sent = 0.0
        self._last_frame: CsiFrame | None = None
        self._rate_window: deque[float] = deque(maxlen=256)
        self.exhausted = threading.Event()  # set when a finite source ends

    # -- control (any thread) -------------------------------------------------

    def apply_patch(self, patch: dict) -> int:
        with self._lock:
            return self.pipeline.apply_config_patch(patch)

    def set_mode(self, mode: str) -> int:
        return self.apply_patch({"mode": mode})

    def set_scene(self, scene: Scene) -> None:
        if not isinstance(self.source, SimulatorSource):
            raise ValueError("set_scene requires the simulator source")
        self.source.set_scene(scene)

    def current_config(self) -> SensingConfig:
        with self._lock:
            return self.pipeline.config

    def staged_config(self) -> SensingConfig:
        with self._lock:
            return self.pipeline._staged_config

    def sampling_hz(self) -> float:
        if len(self._rate_window) < 2:
            return 0.0
        span = self._rate_window[-1] - self._rate_window[0]
        if span <= 0:
            return 0.0
        return (len(self._rate_window) - 1) / span

    def hello_message(self) -> dict:
        config = self.current_config()
        return {
            "type": "hello",
            "config": config_to_dict(config),
            "config_id": self.pipeline.config_id,
            "axes": _axes_dict(config),
        }

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        proc = threading.Thread(target=self._process_loop, name="livesense-proc", daemon=True)
        src = threading.Thread(target=self._source_loop, name="livesense-src", daemon=True)
        self._threads = [proc, src]
        proc.start()
        src.start()

    def stop(self) -> None:
        self._stop.set()
        self._wake.set()
        for thread in self._threads:
            thread.join(timeout=5.0)
        self._threads = []

    # -- internals ---------------------------------------------------------------

    def ingest(self, frame: CsiFrame) -> None:
        """Hand a raw frame to the processing thread; never blocks."""
        self._ingest.append(frame)
        self._rate_window.append(time.monotonic())
        self._wake.set()

    def _source_loop(self) -> None:
        try:
            self.source.run(self)
        finally:
            self.exhausted.set()
            self._wake.set()

    def _process_loop(self) -> None:
        while not self._stop.is_set():
            self._wake.wait(timeout=0.05)
            self._wake.clear()
            drained = False
            while self._ingest:
                frame = self._ingest.popleft()
                drained = True
                self._last_frame = frame
                if self._record is not None:
                    self._record.write(frame)
                try:
                    with self._lock:
                        self.pipeline.push_frame(frame)
                except ValueError:
                    continue  # malformed frame must not kill the thread
            if not drained and not self.exhausted.is_set():
                continue
            with self._lock:
                results = self.pipeline.process_available()
            for result in results:
                self.batches.append(result)
                self._publish(result)

    def _publish(self, result: BatchResult) -> None:
        now = time.monotonic()
        config = self.pipeline.config
        if now - self._last_rdm_sent >= RDM_MIN_INTERVAL_S:
            self._last_rdm_sent = now
            self.broadcaster.publish("rdm", rdm_message(result))
            if self._last_frame is not None:
                self.broadcaster.publish("csi_stats", csi_stats_message(self._last_frame))
        self.broadcaster.publish("targets", targets_message(result))
        self.broadcaster.publish("tracks", tracks_message(result))
        self.broadcaster.publish("vitals", vitals_message(result, list(self.batches)))
        self.broadcaster.publish(
            "stats", stats_message(result, self.sampling_hz(), config)
        )


def _axes_dict(config: SensingConfig) -> dict:
    return {
        "range_m": [float(r) for r in range_axis(config)],
        "velocity_mps": [float(v) for v in velocity_axis(config)],
    }


def rdm_message(result: BatchResult) -> dict:
    rdm = result.map
    return {
        "type": "rdm",
        "batch_seq": rdm.batch_seq,
        "config_id": result.config_id,
        "timestamp": rdm.batch_timestamp,
        "mag_db": [[round(float(v), 2) for v in row] for row in rdm.mag_db],
        "range_axis": [float(r) for r in rdm.range_axis],
        "velocity_axis": [float(v) for v in rdm.velocity_axis],
    }


def targets_message(result: BatchResult) -> dict:
    return {
        "type": "targets",
        "batch_seq": result.map.batch_seq,
        "config_id": result.config_id,
        "detections": [
            {
                "range_m": det.range_m,
                "velocity_mps": det.velocity_mps,
                "snr_db": det.snr_db,
                "bin_r": det.bin_r,
                "bin_d": det.bin_d,
                "refined": det.refined,
            }
            for det in result.detections
        ],
    }


def tracks_message(result: BatchResult) -> dict:
    return {
        "type": "tracks",
        "batch_seq": result.map.batch_seq,
        "config_id": result.config_id,
        "tracks": [
            {
                "id": track.id,
                "state": track.state,
                "range_m": track.range_m,
                "velocity_mps": track.velocity_mps,
                "snr_db": track.snr_db,
                "hits": track.hits,
                "misses": track.misses,
                "history": [list(point) for point in track.history],
            }
            for track in result.tracks
        ],
    }


def vitals_message(result: BatchResult, window: list[BatchResult]) -> dict:
    presence = presence_decision(window)
    message = {
        "type": "vitals",
        "batch_seq": result.map.batch_seq,
        "present": presence.present,
        "score": presence.score,
        "source": presence.source,
    }
    if result.vitals is not None:
        message.update(
            rate_hz=result.vitals.rate_hz,
            confidence_db=result.vitals.confidence_db,
            window_span_s=result.vitals.window_span_s,
            range_bin=result.vitals.range_bin,
        )
    return message


def stats_message(result: BatchResult, sampling_hz: float, config: SensingConfig) -> dict:
    t = result.timings
    return {
        "type": "stats",
        "batch_seq": result.map.batch_seq,
        "config_id": result.config_id,
        "timings": {
            "ingest_ms": t.ingest_ms,
            "sync_ms": t.sync_ms,
            "sic_ms": t.sic_ms,
            "fft_ms": t.fft_ms,
            "detect_ms": t.detect_ms,
            "total_ms": t.total_ms,
        },
        "drop_count": result.drop_count,
        "degraded_count": result.degraded_count,
        "gap_filled": result.gap_filled,
        "low_confidence": result.low_confidence,
        "sampling_hz": sampling_hz,
        "mode": config.mode,
        # Live config echo: lets the console snap controls back to server
        # truth (e.g. after a rejected patch).
        "config": config_to_dict(config),
    }


def csi_stats_message(frame: CsiFrame) -> dict:
    mag = np.abs(frame.csi)
    phase = np.angle(frame.csi)
    return {
        "type": "csi_stats",
        "seq": frame.seq,
        "mag": [round(float(v), 4) for v in mag],
        "phase": [round(float(v), 4) for v in phase],
    }


# -- frame sources -------------------------------------------------------------


class FrameSource:
    """Produces raw frames into service.ingest(); run() returns when done."""

    def run(self, service: PipelineService) -> None:
        raise NotImplementedError


class SimulatorSource(FrameSource):
    """Generates scene frames, paced at the nominal frame interval.

    The scene can be swapped while running; the frame index keeps
    increasing so timestamps stay monotonic.
    """

    def __init__(self, scene: Scene, config: SensingConfig, n_frames: int | None = None,
                 realtime: bool = True):
        self._scene = scene
        self._config = config
        self._n_frames = n_frames
        self._realtime = realtime
        self._scene_lock = threading.Lock()

    def set_scene(self, scene: Scene) -> None:
        with self._scene_lock:
            self._scene = scene

    def run(self, service: PipelineService) -> None:
        interval = self._config.frame_interval_s
        start = time.monotonic()
        m = 0
        while not service._stop.is_set():
            if self._n_frames is not None and m >= self._n_frames:
                return
            with self._scene_lock:
                scene = self._scene
            if not frame_dropped(scene, m):
                service.ingest(generate_frame(scene, self._config, m))
            m += 1
            if self._realtime:
                next_due = start + m * interval
                delay = next_due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)


class TraceSource(FrameSource):
    """Replays decoded frames, optionally paced by their timestamps."""

    def __init__(self, frames, realtime: bool = False):
        self._frames = list(frames)
        self._realtime = realtime

    def run(self, service: PipelineService) -> None:
        if not self._frames:
            return
        start = time.monotonic()
        t0 = self._frames[0].timestamp
        for frame in self._frames:
            if service._stop.is_set():
                return
            if self._realtime:
                due = start + (frame.timestamp - t0)
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            service.ingest(frame)


class UdpSource(FrameSource):
    """Receives one frame per datagram (trace frame record layout)."""

    def __init__(self, address: str, port: int, n_subcarriers: int):
        self._address = address
        self._port = port
        self._n = n_subcarriers
        self.bound = threading.Event()
        self.bound_address: tuple[str, int] | None = None

    def run(self, service: PipelineService) -> None:
        record_size = _FRAME_META_SIZE + 8 * self._n
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            sock.bind((self._address, self._port))
            sock.settimeout(0.2)
            self.bound_address = sock.getsockname()
            self.bound.set()
            while not service._stop.is_set():
                try:
                    payload, _ = sock.recvfrom(record_size + 64)
                except socket.timeout:
                    continue
                try:
                    frame = decode_frame_payload(payload, self._n)
                except ValueError:
                    continue  # malformed datagram: skip
                service.ingest(frame)
