"""Multi-target track maintenance over batch detections.

Greedy nearest-neighbor association in a normalized range/velocity gate,
alpha-beta smoothing of the track state, and a tentative -> confirmed ->
dead lifecycle. Greedy association is adequate at the handful-of-targets
scale this pipeline runs at; swap in an optimal assignment if that ever
changes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import TrackConfig
from .detect import Detection

ALPHA = 0.5  # position residual gain
BETA = 0.2  # velocity residual gain

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


@dataclass
class Track:
    id: int
    range_m: float
    velocity_mps: float
    state: str = TENTATIVE
    hits: int = 1
    misses: int = 0
    last_timestamp: float = 0.0
    history: list = None  # list of (timestamp, range_m, velocity_mps, snr_db)

    def __post_init__(self) -> None:
        if self.history is None:
            self.history = []

    def predict_range(self, t: float) -> float:
        return self.range_m + self.velocity_mps * (t - self.last_timestamp)


@dataclass(frozen=True)
class TrackView:
    """Immutable snapshot of a track for batch results and the wire."""

    id: int
    state: str
    range_m: float
    velocity_mps: float
    snr_db: float
    hits: int
    misses: int
    history: tuple

    @classmethod
    def of(cls, track: Track, tail: int = 64) -> "TrackView":
        snr = track.history[-1][3] if track.history else 0.0
        return cls(
            id=track.id,
            state=track.state,
            range_m=track.range_m,
            velocity_mps=track.velocity_mps,
            snr_db=snr,
            hits=track.hits,
            misses=track.misses,
            history=tuple(track.history[-tail:]),
        )


class Tracker:
    """Owns the track store for one stream; single-writer."""

    def __init__(self):
        self._tracks: list[Track] = []
        self._next_id = 1

    @property
    def tracks(self) -> list[Track]:
        return self._tracks

    def update(
        self, detections: list[Detection], t: float, params: TrackConfig
    ) -> tuple[TrackView, ...]:
        """Associate one batch of detections, run lifecycle, return snapshots.

        Association is greedy by ascending normalized distance
        d = |dr| / gate_range + |dv| / gate_vel, accepting d < 1, each
        track and detection used at most once.
        """
        candidates = []
        for ti, track in enumerate(self._tracks):
            r_pred = track.predict_range(t)
            for di, det in enumerate(detections):
                d = (
                    abs(det.range_m - r_pred) / params.gate_range_m
                    + abs(det.velocity_mps - track.velocity_mps) / params.gate_vel_mps
                )
                if d < 1.0:
                    candidates.append((d, ti, di))
        candidates.sort()

        used_tracks: set[int] = set()
        used_dets: set[int] = set()
        for d, ti, di in candidates:
            if ti in used_tracks or di in used_dets:
                continue
            used_tracks.add(ti)
            used_dets.add(di)
            self._associate(self._tracks[ti], detections[di], t, params)

        for ti, track in enumerate(self._tracks):
            if ti not in used_tracks:
                track.misses += 1
                if track.misses >= params.delete_misses:
                    track.state = DEAD

        for di, det in enumerate(detections):
            if di not in used_dets:
                self._tracks.append(self._new_track(det, t, params))

        views = tuple(TrackView.of(track) for track in self._tracks)
        self._tracks = [track for track in self._tracks if track.state != DEAD]
        return views

    def _associate(
        self, track: Track, det: Detection, t: float, params: TrackConfig
    ) -> None:
        dt = t - track.last_timestamp
        r_pred = track.predict_range(t)
        residual = det.range_m - r_pred
        track.range_m = r_pred + ALPHA * residual
        if dt > 0:
            track.velocity_mps += BETA * residual / dt
        track.hits += 1
        track.misses = 0
        track.last_timestamp = t
        track.history.append((t, det.range_m, det.velocity_mps, det.snr_db))
        if track.state == TENTATIVE and track.hits >= params.confirm_hits:
            track.state = CONFIRMED

    def _new_track(self, det: Detection, t: float, params: TrackConfig) -> Track:
        track = Track(
            id=self._next_id,
            range_m=det.range_m,
            velocity_mps=det.velocity_mps,
            state=CONFIRMED if params.confirm_hits <= 1 else TENTATIVE,
            last_timestamp=t,
            history=[(t, det.range_m, det.velocity_mps, det.snr_db)],
        )
        self._next_id += 1
        return track
