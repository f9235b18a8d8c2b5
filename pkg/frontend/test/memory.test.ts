/** Sustained-stream budget: 10 rdm/s for 60 s must not grow state. */

import { describe, expect, it } from "vitest";

import { RdmMsg, Session, TRACK_STRIP_POINTS } from "../src/protocol.js";

function frame(batchSeq: number, rows = 32, cols = 43): RdmMsg {
    return {
        type: "rdm",
        batch_seq: batchSeq,
        config_id: 0,
        timestamp: batchSeq * 0.1,
        mag_db: Array.from({ length: rows }, () =>
            Array.from({ length: cols }, () => -60 + Math.random() * 30),
        ),
        range_axis: Array.from({ length: cols }, (_, i) => i * 0.117),
        velocity_axis: Array.from({ length: rows }, (_, i) => (i - rows / 2) * 0.031),
    };
}

describe("memory budget", () => {
    it("600 frames at 10/s leave exactly one retained map and bounded strips", () => {
        const s = new Session();
        s.handle({
            type: "hello",
            config: {},
            config_id: 0,
            axes: { range_m: [], velocity_mps: [] },
        });
        for (let i = 0; i < 600; i++) {
            s.handle(frame(i));
            s.handle({
                type: "targets",
                batch_seq: i,
                config_id: 0,
                detections: [],
            });
            s.handle({
                type: "tracks",
                batch_seq: i,
                config_id: 0,
                tracks: [1, 2, 3].map((id) => ({
                    id,
                    state: "confirmed" as const,
                    range_m: 1 + id,
                    velocity_mps: 0.1,
                    snr_db: 20,
                    hits: i + 1,
                    misses: 0,
                    history: [[i * 0.1, 1 + id, 0.1, 20]] as [number, number, number, number][],
                })),
            });
            s.handle({
                type: "stats",
                batch_seq: i,
                config_id: 0,
                timings: { total_ms: 20 },
                drop_count: 0,
                degraded_count: 0,
                gap_filled: 0,
                low_confidence: 0,
                sampling_hz: 40,
                mode: "gesture",
            });
        }
        expect(s.framesSeen).toBe(600);
        expect(s.framesSkipped).toBe(0);
        expect(s.rdm?.batch_seq).toBe(599);
        // Fixed frame budget: one object per channel, never a backlog.
        expect(s.retainedFrameCount()).toBeLessThanOrEqual(6);
        expect(s.strips.size).toBe(3);
        for (const strip of s.strips.values()) {
            expect(strip.points.length).toBeLessThanOrEqual(TRACK_STRIP_POINTS);
        }
        expect(s.pending.size).toBe(0);
    });
});
