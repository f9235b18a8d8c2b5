/**
 * Strip charts (track range/velocity history) and the per-subcarrier
 * magnitude/phase panel. Scaling helpers are pure; drawing needs a canvas.
 */

import type { CsiStatsMsg, TrackStrip } from "./protocol.js";

export interface Scale {
    min: number;
    max: number;
}

export function autoScale(values: number[], pad = 0.1): Scale {
    if (values.length === 0) return { min: 0, max: 1 };
    let min = Infinity;
    let max = -Infinity;
    for (const v of values) {
        if (v < min) min = v;
        if (v > max) max = v;
    }
    if (min === max) {
        min -= 0.5;
        max += 0.5;
    }
    const margin = (max - min) * pad;
    return { min: min - margin, max: max + margin };
}

export function toPixel(value: number, scale: Scale, extent: number): number {
    return extent - ((value - scale.min) / (scale.max - scale.min)) * extent;
}

const STRIP_COLORS = ["#00e5ff", "#ffb300", "#76ff03", "#ff4081", "#b388ff"];

export function stripColor(id: number): string {
    return STRIP_COLORS[id % STRIP_COLORS.length];
}

export function drawStrips(
    canvas: HTMLCanvasElement,
    strips: TrackStrip[],
    component: 1 | 2, // 1 = range, 2 = velocity
    label: string,
): void {
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.font = "11px monospace";
    ctx.fillStyle = "#9aa";
    ctx.fillText(label, 6, 12);
    const all: number[] = [];
    let tMin = Infinity;
    let tMax = -Infinity;
    for (const strip of strips) {
        for (const p of strip.points) {
            all.push(p[component]);
            if (p[0] < tMin) tMin = p[0];
            if (p[0] > tMax) tMax = p[0];
        }
    }
    if (all.length === 0 || tMax <= tMin) return;
    const scale = autoScale(all);
    for (const strip of strips) {
        ctx.strokeStyle = stripColor(strip.id);
        ctx.lineWidth = strip.state === "confirmed" ? 1.8 : 0.8;
        ctx.beginPath();
        strip.points.forEach((p, i) => {
            const x = ((p[0] - tMin) / (tMax - tMin)) * (canvas.width - 10) + 5;
            const y = toPixel(p[component], scale, canvas.height - 16) + 14;
            if (i === 0) ctx.moveTo(x, y);
            else ctx.lineTo(x, y);
        });
        ctx.stroke();
    }
    ctx.fillStyle = "#9aa";
    ctx.fillText(scale.max.toFixed(2), 6, 24);
    ctx.fillText(scale.min.toFixed(2), 6, canvas.height - 4);
}

export function drawCsiPanel(canvas: HTMLCanvasElement, msg: CsiStatsMsg): void {
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const half = canvas.height / 2;
    const n = msg.mag.length;
    if (n === 0) return;

    const magScale = autoScale(msg.mag);
    ctx.strokeStyle = "#00e5ff";
    ctx.lineWidth = 1;
    ctx.beginPath();
    msg.mag.forEach((v, k) => {
        const x = (k / (n - 1)) * canvas.width;
        const y = toPixel(v, magScale, half - 6) + 3;
        if (k === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
    });
    ctx.stroke();

    ctx.strokeStyle = "#ffb300";
    ctx.beginPath();
    msg.phase.forEach((v, k) => {
        const x = (k / (n - 1)) * canvas.width;
        const y = half + toPixel(v, { min: -Math.PI, max: Math.PI }, half - 6) + 3;
        if (k === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
    });
    ctx.stroke();

    ctx.fillStyle = "#9aa";
    ctx.font = "11px monospace";
    ctx.fillText("|H(k)|", 6, 12);
    ctx.fillText("arg H(k)", 6, half + 12);
}
