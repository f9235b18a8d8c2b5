"""Track lifecycle, association gating, identity continuity."""

import pytest

from livesense import Detection, Tracker
from livesense.config import TrackConfig

T_BATCH = 0.8  # one 32-frame batch at 25 ms


def det(range_m, velocity=0.0, snr=20.0, t=0.0):
    return Detection(
        range_m=range_m,
        velocity_mps=velocity,
        snr_db=snr,
        bin_r=range_m / 0.117,
        bin_d=velocity / 0.031,
        timestamp=t,
    )


def params(**overrides):
    return TrackConfig(**{**dict(
        gate_range_m=0.5, gate_vel_mps=0.15, confirm_hits=3, delete_misses=3
    ), **overrides})


class TestLifecycle:
    def test_new_detection_starts_tentative_track(self):
        tracker = Tracker()
        views = tracker.update([det(1.0, 0.2)], 0.0, params())
        assert len(views) == 1
        assert views[0].state == "tentative"
        assert views[0].hits == 1

    def test_three_hits_confirm(self):
        tracker = Tracker()
        p = params(confirm_hits=3)
        for i in range(3):
            views = tracker.update([det(1.0 + 0.2 * T_BATCH * i, 0.2, t=i * T_BATCH)], i * T_BATCH, p)
        assert views[0].state == "confirmed"
        assert views[0].hits == 3

    def test_misses_delete(self):
        tracker = Tracker()
        p = params(delete_misses=2)
        tracker.update([det(1.0)], 0.0, p)
        tracker.update([], T_BATCH, p)
        views = tracker.update([], 2 * T_BATCH, p)
        assert views[0].state == "dead"
        assert tracker.tracks == []

    def test_miss_counter_resets_on_hit(self):
        tracker = Tracker()
        p = params(delete_misses=2)
        tracker.update([det(1.0)], 0.0, p)
        tracker.update([], T_BATCH, p)
        views = tracker.update([det(1.0)], 2 * T_BATCH, p)
        assert views[0].misses == 0
        assert views[0].state != "dead"

    def test_history_timestamps_increase(self):
        tracker = Tracker()
        p = params()
        for i in range(5):
            views = tracker.update([det(1.0, 0.0, t=i * T_BATCH)], i * T_BATCH, p)
        history = views[0].history
        times = [h[0] for h in history]
        assert times == sorted(times)
        assert len(set(times)) == len(times)

    def test_track_count_bounded_by_detections_seen(self):
        tracker = Tracker()
        p = params()
        seen = 0
        for i in range(4):
            dets = [det(1.0 + j, 0.0, t=i * T_BATCH) for j in range(i % 3)]
            seen += len(dets)
            tracker.update(dets, i * T_BATCH, p)
            assert len(tracker.tracks) <= seen


class TestAssociation:
    def test_outside_gate_spawns_new_track(self):
        tracker = Tracker()
        p = params()
        tracker.update([det(1.0, 0.0)], 0.0, p)
        views = tracker.update([det(3.0, 0.0, t=T_BATCH)], T_BATCH, p)
        assert len(views) == 2

    def test_velocity_gate_separates_same_range(self):
        # Same range, very different Doppler: two tracks, not one.
        tracker = Tracker()
        p = params()
        tracker.update([det(1.0, -0.2), det(1.0, 0.2)], 0.0, p)
        assert len(tracker.tracks) == 2

    def test_each_detection_used_once(self):
        tracker = Tracker()
        p = params()
        tracker.update([det(1.0, 0.0), det(1.2, 0.0)], 0.0, p)
        views = tracker.update([det(1.1, 0.0, t=T_BATCH)], T_BATCH, p)
        matched = [v for v in views if v.misses == 0 and v.hits == 2]
        assert len(matched) == 1

    def test_crossing_targets_keep_identity(self):
        # Two targets cross in range; velocity separation beyond the gate
        # keeps the identities straight through the crossing.
        tracker = Tracker()
        p = params()
        ids_by_velocity = {}
        for i in range(7):
            t = i * T_BATCH
            r_up = 1.0 + 0.25 * t  # rising target
            r_down = 2.4 - 0.25 * t  # falling target
            views = tracker.update(
                [det(r_up, 0.25, t=t), det(r_down, -0.25, t=t)], t, p
            )
            for view in views:
                key = 1 if view.velocity_mps > 0 else -1
                ids_by_velocity.setdefault(key, set()).add(view.id)
        # Each motion direction stayed one single track the whole run.
        assert len(ids_by_velocity[1]) == 1
        assert len(ids_by_velocity[-1]) == 1
        assert ids_by_velocity[1] != ids_by_velocity[-1]

    def test_smoothing_follows_constant_velocity(self):
        tracker = Tracker()
        p = params()
        for i in range(6):
            t = i * T_BATCH
            views = tracker.update([det(1.0 + 0.2 * t, 0.2, t=t)], t, p)
        track = views[0]
        assert track.range_m == pytest.approx(1.0 + 0.2 * 5 * T_BATCH, abs=0.05)
        assert track.velocity_mps == pytest.approx(0.2, abs=0.02)
