/**
 * Wire protocol types and the session state machine.
 *
 * All console state derives from server messages; there is no client-side
 * DSP. The Session class is pure bookkeeping (no DOM, no sockets) so the
 * steering lifecycle and memory bounds are unit-testable against scripted
 * message sequences.
 */

export interface Axes {
    range_m: number[];
    velocity_mps: number[];
}

export interface HelloMsg {
    type: "hello";
    config: Record<string, unknown>;
    config_id: number;
    axes: Axes;
}

export interface RdmMsg {
    type: "rdm";
    batch_seq: number;
    config_id: number;
    timestamp: number;
    mag_db: number[][];
    range_axis: number[];
    velocity_axis: number[];
}

export interface DetectionMsg {
    range_m: number;
    velocity_mps: number;
    snr_db: number;
    bin_r: number;
    bin_d: number;
    refined: boolean;
}

export interface TargetsMsg {
    type: "targets";
    batch_seq: number;
    config_id: number;
    detections: DetectionMsg[];
}

export interface TrackMsg {
    id: number;
    state: "tentative" | "confirmed" | "dead";
    range_m: number;
    velocity_mps: number;
    snr_db: number;
    hits: number;
    misses: number;
    history: [number, number, number, number][]; // t, range, velocity, snr
}

export interface TracksMsg {
    type: "tracks";
    batch_seq: number;
    config_id: number;
    tracks: TrackMsg[];
}

export interface VitalsMsg {
    type: "vitals";
    batch_seq: number;
    present: boolean;
    score: number;
    source: "track" | "vitals" | "none";
    rate_hz?: number;
    confidence_db?: number;
    range_bin?: number;
}

export interface StatsMsg {
    type: "stats";
    batch_seq: number;
    config_id: number;
    timings: Record<string, number>;
    drop_count: number;
    degraded_count: number;
    gap_filled: number;
    low_confidence: number;
    sampling_hz: number;
    mode: string;
    config?: Record<string, unknown>; // live server config echo
}

export interface CsiStatsMsg {
    type: "csi_stats";
    seq: number;
    mag: number[];
    phase: number[];
}

export interface AckMsg {
    type: "ack";
    request_id: string;
    config_id?: number;
    channels?: string[];
}

export interface ErrorMsg {
    type: "error";
    request_id?: string;
    message: string;
}

export type ServerMsg =
    | HelloMsg
    | RdmMsg
    | TargetsMsg
    | TracksMsg
    | VitalsMsg
    | StatsMsg
    | CsiStatsMsg
    | AckMsg
    | ErrorMsg;

export type RequestKind = "set_config" | "set_mode" | "set_scene" | "subscribe";

export interface PendingRequest {
    kind: RequestKind;
    label: string;
}

/** Per-track display history ring (client-side cap, oldest dropped). */
export const TRACK_STRIP_POINTS = 120;

/** Structural keys a running session can never change. */
export const STRUCTURAL_KEYS = new Set([
    "n_subcarriers",
    "bandwidth_hz",
    "frame_interval_s",
    "doppler_batch",
]);

export interface TrackStrip {
    id: number;
    state: string;
    points: [number, number, number][]; // t, range, velocity
    lastSeen: number; // batch_seq
}

export class Session {
    connection: "connecting" | "open" | "closed" = "connecting";
    config: Record<string, unknown> | null = null;
    configId = 0;
    axes: Axes | null = null;

    rdm: RdmMsg | null = null; // latest frame only; older frames discarded
    targets: TargetsMsg | null = null;
    tracks: TracksMsg | null = null;
    vitals: VitalsMsg | null = null;
    stats: StatsMsg | null = null;
    csiStats: CsiStatsMsg | null = null;

    strips = new Map<number, TrackStrip>();

    pending = new Map<string, PendingRequest>();
    /** Ack received, waiting for the first rdm carrying the new config_id. */
    applying: { requestId: string; configId: number; label: string } | null = null;

    lastError: string | null = null;
    badge: string | null = null; // transient warning (e.g. skipped frame)
    framesSeen = 0;
    framesSkipped = 0;
    duplicateResolutions = 0;

    private nextRequestId = 1;

    /** Issue a request id and record it as pending. Returns the id. */
    issue(kind: RequestKind, label: string): string {
        const id = `r${this.nextRequestId++}`;
        this.pending.set(id, { kind, label });
        return id;
    }

    /** Feed one server message; returns false if it was rejected. */
    handle(msg: ServerMsg): boolean {
        switch (msg.type) {
            case "hello":
                this.connection = "open";
                this.config = msg.config;
                this.configId = msg.config_id;
                this.axes = msg.axes;
                // Full resynchronization: stale per-batch state is dropped.
                this.rdm = null;
                this.targets = null;
                this.tracks = null;
                this.vitals = null;
                this.stats = null;
                this.csiStats = null;
                this.strips.clear();
                return true;
            case "rdm":
                return this.handleRdm(msg);
            case "targets":
                this.targets = msg;
                return true;
            case "tracks":
                this.handleTracks(msg);
                return true;
            case "vitals":
                this.vitals = msg;
                return true;
            case "stats":
                this.stats = msg;
                return true;
            case "csi_stats":
                this.csiStats = msg;
                return true;
            case "ack":
                return this.resolve(msg.request_id, null, msg);
            case "error":
                if (msg.request_id !== undefined) {
                    return this.resolve(msg.request_id, msg.message, null);
                }
                this.lastError = msg.message;
                return true;
        }
    }

    private handleRdm(msg: RdmMsg): boolean {
        this.framesSeen += 1;
        const rows = msg.mag_db.length;
        const cols = rows > 0 ? msg.mag_db[0].length : 0;
        const shapeOk =
            rows === msg.velocity_axis.length &&
            cols === msg.range_axis.length &&
            msg.mag_db.every((row) => row.length === cols);
        if (!shapeOk) {
            this.framesSkipped += 1;
            this.badge = `skipped rdm ${msg.batch_seq}: axis/matrix shape mismatch`;
            return false;
        }
        this.badge = null;
        this.rdm = msg; // replaces the previous frame: fixed memory budget
        if (msg.config_id !== this.configId) {
            this.configId = msg.config_id;
            this.axes = { range_m: msg.range_axis, velocity_mps: msg.velocity_axis };
        }
        if (this.applying !== null && msg.config_id >= this.applying.configId) {
            this.applying = null; // the new configuration is live on screen
        }
        return true;
    }

    private handleTracks(msg: TracksMsg): void {
        this.tracks = msg;
        for (const track of msg.tracks) {
            if (track.state === "dead") {
                this.strips.delete(track.id);
                continue;
            }
            let strip = this.strips.get(track.id);
            if (strip === undefined) {
                strip = { id: track.id, state: track.state, points: [], lastSeen: 0 };
                this.strips.set(track.id, strip);
            }
            strip.state = track.state;
            strip.lastSeen = msg.batch_seq;
            const last = track.history[track.history.length - 1];
            if (last !== undefined) {
                const prev = strip.points[strip.points.length - 1];
                if (prev === undefined || prev[0] < last[0]) {
                    strip.points.push([last[0], last[1], last[2]]);
                    if (strip.points.length > TRACK_STRIP_POINTS) {
                        strip.points.splice(0, strip.points.length - TRACK_STRIP_POINTS);
                    }
                }
            }
        }
        // Tracks absent for a while have died server-side; reap their strips.
        for (const [id, strip] of this.strips) {
            if (msg.batch_seq - strip.lastSeen > 8) {
                this.strips.delete(id);
            }
        }
    }

    /** Resolve a pending request with exactly one ack or error. */
    private resolve(requestId: string, error: string | null, ack: AckMsg | null): boolean {
        const pending = this.pending.get(requestId);
        if (pending === undefined) {
            this.duplicateResolutions += 1;
            return false;
        }
        this.pending.delete(requestId);
        if (error !== null) {
            this.lastError = `${pending.label}: ${error}`;
            return true;
        }
        this.lastError = null;
        if (ack !== null && ack.config_id !== undefined &&
            (pending.kind === "set_config" || pending.kind === "set_mode")) {
            if (ack.config_id > this.configId) {
                // Applied at the next batch boundary; hold "applying" until
                // a map rendered under the new config arrives.
                this.applying = {
                    requestId,
                    configId: ack.config_id,
                    label: pending.label,
                };
            }
        }
        return true;
    }

    /** Overlays are rendered only when they match the on-screen map. */
    overlaysForRender(): { detections: DetectionMsg[]; tracks: TrackMsg[] } {
        if (this.rdm === null) {
            return { detections: [], tracks: [] };
        }
        const detections =
            this.targets !== null &&
            this.targets.config_id === this.rdm.config_id &&
            this.targets.batch_seq === this.rdm.batch_seq
                ? this.targets.detections
                : [];
        const tracks =
            this.tracks !== null && this.tracks.config_id === this.rdm.config_id
                ? this.tracks.tracks.filter((t) => t.state === "confirmed")
                : [];
        return { detections, tracks };
    }

    /** Upper bound on retained per-batch objects (memory budget audit). */
    retainedFrameCount(): number {
        let count = 0;
        if (this.rdm !== null) count += 1;
        if (this.targets !== null) count += 1;
        if (this.tracks !== null) count += 1;
        if (this.vitals !== null) count += 1;
        if (this.stats !== null) count += 1;
        if (this.csiStats !== null) count += 1;
        return count;
    }
}
