/**
 * Console entry point: builds the panels, connects the client, and renders
 * on a display-refresh throttle (one socket reader, no work in handlers
 * beyond state updates).
 */

import { ConsoleClient, serverUrlFromLocation } from "./client.js";
import { drawCsiPanel, drawStrips } from "./charts.js";
import { axisLabels, drawHeatmap } from "./heatmap.js";

const client = new ConsoleClient(serverUrlFromLocation(window.location));

function el<T extends HTMLElement>(id: string): T {
    return document.getElementById(id) as T;
}

let dirty = false;
client.onChange = () => {
    dirty = true;
};

function renderLoop(): void {
    if (dirty) {
        dirty = false;
        render();
    }
    requestAnimationFrame(renderLoop);
}

function render(): void {
    const s = client.session;
    el("conn").textContent = s.connection;
    el("conn").className = `pill ${s.connection}`;

    const applying = s.applying;
    el("applying").textContent = applying
        ? `applying ${applying.label} (config ${applying.configId})...`
        : "";
    el("error").textContent = s.lastError ?? "";
    el("badge").textContent = s.badge ?? "";

    if (s.stats) {
        const t = s.stats.timings;
        el("stats").textContent =
            `mode=${s.stats.mode} config#${s.stats.config_id} ` +
            `batch ${s.stats.batch_seq} | ${s.stats.sampling_hz.toFixed(1)} Hz in | ` +
            `batch ${t.total_ms.toFixed(1)} ms | drops ${s.stats.drop_count} | ` +
            `gaps ${s.stats.gap_filled} | degraded ${s.stats.degraded_count}`;
        // With nothing pending, controls track the server's live config, so
        // a rejected or superseded change snaps back to truth.
        if (s.pending.size === 0 && s.applying === null && s.stats.config) {
            syncControls(s.stats.config);
        }
    }

    if (s.vitals) {
        const v = s.vitals;
        const rate = v.rate_hz !== undefined
            ? ` breathing ${(v.rate_hz * 60).toFixed(1)} /min (${v.confidence_db?.toFixed(0)} dB)`
            : "";
        el("vitals").textContent = v.present
            ? `PRESENT via ${v.source} (score ${v.score.toFixed(1)} dB)${rate}`
            : "no presence";
        el("vitals").className = `banner ${v.present ? "present" : "absent"}`;
    }

    if (s.rdm) {
        const overlays = s.overlaysForRender();
        drawHeatmap(el<HTMLCanvasElement>("rdm"), s.rdm, overlays.detections);
        el("range-ticks").textContent =
            axisLabels(s.rdm.range_axis, 8).join("  ") + "  m";
        el("vel-ticks").textContent =
            `${s.rdm.velocity_axis[s.rdm.velocity_axis.length - 1].toFixed(2)} ... ` +
            `${s.rdm.velocity_axis[0].toFixed(2)} m/s`;
        const rows = overlays.tracks.map(
            (t) =>
                `#${t.id} ${t.state} r=${t.range_m.toFixed(2)} m ` +
                `v=${t.velocity_mps.toFixed(3)} m/s snr=${t.snr_db.toFixed(1)} dB`,
        );
        el("tracks").textContent = rows.join("\n") || "no confirmed tracks";
    }

    const strips = [...s.strips.values()];
    drawStrips(el<HTMLCanvasElement>("strip-range"), strips, 1, "range history (m)");
    drawStrips(el<HTMLCanvasElement>("strip-vel"), strips, 2, "velocity history (m/s)");
    if (s.csiStats) {
        drawCsiPanel(el<HTMLCanvasElement>("csi"), s.csiStats);
    }
}

function syncControls(config: Record<string, unknown>): void {
    const mode = el<HTMLSelectElement>("mode");
    if (document.activeElement !== mode && typeof config.mode === "string") {
        mode.value = config.mode;
    }
    const pfaInput = el<HTMLInputElement>("pfa");
    const pfa = config["cfar.pfa"];
    if (document.activeElement !== pfaInput && typeof pfa === "number" && pfa > 0) {
        const exp = Math.round(Math.log10(pfa));
        pfaInput.value = String(exp);
        el("pfa-label").textContent = `pfa = 1e${exp}`;
    }
    const sic = el<HTMLSelectElement>("sic-kind");
    if (document.activeElement !== sic && typeof config["sic.kind"] === "string") {
        sic.value = config["sic.kind"] as string;
    }
    const maxRange = el<HTMLInputElement>("max-range");
    if (document.activeElement !== maxRange && typeof config.max_range_m === "number") {
        maxRange.value = String(config.max_range_m);
    }
}

function wireControls(): void {
    el<HTMLSelectElement>("mode").addEventListener("change", (e) => {
        client.setMode((e.target as HTMLSelectElement).value);
    });
    el<HTMLInputElement>("pfa").addEventListener("change", (e) => {
        const exp = Number((e.target as HTMLInputElement).value);
        el("pfa-label").textContent = `pfa = 1e${exp}`;
        client.setConfig({ "cfar.pfa": 10 ** exp });
    });
    el<HTMLSelectElement>("sic-kind").addEventListener("change", (e) => {
        client.setConfig({ "sic.kind": (e.target as HTMLSelectElement).value });
    });
    el<HTMLInputElement>("max-range").addEventListener("change", (e) => {
        client.setConfig({ max_range_m: Number((e.target as HTMLInputElement).value) });
    });
    el<HTMLButtonElement>("apply-scene").addEventListener("click", () => {
        try {
            const scene = JSON.parse(el<HTMLTextAreaElement>("scene").value);
            client.setScene(scene);
        } catch (err) {
            client.session.lastError = `scene JSON: ${err}`;
            dirty = true;
        }
    });
}

wireControls();
client.connect();
renderLoop();
