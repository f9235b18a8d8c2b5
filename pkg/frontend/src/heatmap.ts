/**
 * Range-Doppler heatmap rasterization. The pixel math is pure (testable
 * without a DOM); canvas drawing is a thin layer on top.
 *
 * Layout: range on X (columns, metres), velocity on Y (rows, m/s) with the
 * zero-velocity row vertically centered and positive velocities upward.
 */

import type { DetectionMsg, RdmMsg } from "./protocol.js";

/** Inferno-like stops, dark-to-bright. */
const STOPS: [number, number, number][] = [
    [0, 0, 4],
    [40, 11, 84],
    [101, 21, 110],
    [159, 42, 99],
    [212, 72, 66],
    [245, 125, 21],
    [250, 193, 39],
    [252, 255, 164],
];

export function colormap(v: number): [number, number, number] {
    const x = Math.max(0, Math.min(1, v)) * (STOPS.length - 1);
    const i = Math.min(Math.floor(x), STOPS.length - 2);
    const f = x - i;
    const a = STOPS[i];
    const b = STOPS[i + 1];
    return [
        Math.round(a[0] + f * (b[0] - a[0])),
        Math.round(a[1] + f * (b[1] - a[1])),
        Math.round(a[2] + f * (b[2] - a[2])),
    ];
}

export interface Raster {
    width: number; // range bins
    height: number; // velocity bins
    rgba: Uint8ClampedArray;
    floorDb: number;
    peakDb: number;
}

/**
 * Rasterize a map into RGBA, one pixel per cell, span dB below the peak.
 * Row 0 of the output is the most positive velocity (drawn at the top);
 * the zero-velocity row lands in the vertical middle.
 */
export function rasterize(msg: RdmMsg, spanDb = 50): Raster {
    const height = msg.mag_db.length;
    const width = msg.range_axis.length;
    let peak = -Infinity;
    for (const row of msg.mag_db) {
        for (const v of row) {
            if (v > peak) peak = v;
        }
    }
    const floor = peak - spanDb;
    const rgba = new Uint8ClampedArray(width * height * 4);
    for (let y = 0; y < height; y++) {
        const row = msg.mag_db[height - 1 - y]; // velocity ascending upward
        for (let x = 0; x < width; x++) {
            const t = (row[x] - floor) / spanDb;
            const [r, g, b] = colormap(t);
            const o = (y * width + x) * 4;
            rgba[o] = r;
            rgba[o + 1] = g;
            rgba[o + 2] = b;
            rgba[o + 3] = 255;
        }
    }
    return { width, height, rgba, floorDb: floor, peakDb: peak };
}

/** Map a detection's refined coordinates to raster pixel space. */
export function detectionToPixel(
    det: DetectionMsg,
    msg: RdmMsg,
): { x: number; y: number } {
    const rows = msg.velocity_axis.length;
    return {
        x: det.bin_r + 0.5,
        y: rows - 1 - det.bin_d + 0.5,
    };
}

export function drawHeatmap(
    canvas: HTMLCanvasElement,
    msg: RdmMsg,
    detections: DetectionMsg[],
    spanDb = 50,
): void {
    const raster = rasterize(msg, spanDb);
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    const cell = document.createElement("canvas");
    cell.width = raster.width;
    cell.height = raster.height;
    const cellCtx = cell.getContext("2d")!;
    const image = cellCtx.createImageData(raster.width, raster.height);
    image.data.set(raster.rgba);
    cellCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const sx = canvas.width / raster.width;
    const sy = canvas.height / raster.height;
    ctx.drawImage(cell, 0, 0, canvas.width, canvas.height);

    ctx.strokeStyle = "rgba(255,255,255,0.35)";
    ctx.setLineDash([4, 4]);
    const zeroY = (raster.height - 1 - raster.height / 2 + 0.5) * sy;
    ctx.beginPath();
    ctx.moveTo(0, zeroY);
    ctx.lineTo(canvas.width, zeroY);
    ctx.stroke();
    ctx.setLineDash([]);

    for (const det of detections) {
        const p = detectionToPixel(det, msg);
        ctx.strokeStyle = "#00e5ff";
        ctx.lineWidth = 1.5;
        ctx.beginPath();
        ctx.arc(p.x * sx, p.y * sy, 7, 0, 2 * Math.PI);
        ctx.stroke();
    }
}

/** Tick labels for the axes readout under/next to the heatmap. */
export function axisLabels(values: number[], maxTicks: number): string[] {
    if (values.length === 0) return [];
    const step = Math.max(1, Math.ceil(values.length / maxTicks));
    const out: string[] = [];
    for (let i = 0; i < values.length; i += step) {
        out.push(values[i].toFixed(2));
    }
    return out;
}
