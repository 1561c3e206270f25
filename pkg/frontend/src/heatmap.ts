// Heatmap grid -> RGBA overlay. The max cell maps to full opacity; the
// colormap is a warm three-stop ramp. Kept DOM-free so it unit-tests in
// node: the result is a plain {width, height, data} buffer that app code
// wraps in ImageData.

import type { HeatmapPayload } from "./types.js";

export interface RgbaBuffer {
  width: number;
  height: number;
  data: Uint8ClampedArray;
}

export class HeatmapResolutionError extends Error {}

const STOPS: [number, number, number][] = [
  [16, 16, 96], // low: deep blue
  [220, 80, 20], // mid: orange
  [255, 240, 120], // high: pale yellow
];

function colorAt(v: number): [number, number, number] {
  const t = Math.min(Math.max(v, 0), 1) * (STOPS.length - 1);
  const i = Math.min(Math.floor(t), STOPS.length - 2);
  const f = t - i;
  const [r0, g0, b0] = STOPS[i];
  const [r1, g1, b1] = STOPS[i + 1];
  return [r0 + (r1 - r0) * f, g0 + (g1 - g0) * f, b0 + (b1 - b0) * f];
}

export function heatmapToRgba(payload: HeatmapPayload, maxAlpha = 0.85): RgbaBuffer {
  const { res, values } = payload;
  if (values.length !== res * res) {
    throw new HeatmapResolutionError(
      `grid has ${values.length} cells, expected ${res}x${res}`,
    );
  }
  const peak = Math.max(...values);
  const data = new Uint8ClampedArray(res * res * 4);
  for (let i = 0; i < values.length; i++) {
    const rel = peak > 0 ? values[i] / peak : 0;
    const [r, g, b] = colorAt(rel);
    data[i * 4] = r;
    data[i * 4 + 1] = g;
    data[i * 4 + 2] = b;
    data[i * 4 + 3] = Math.round(rel * maxAlpha * 255);
  }
  return { width: res, height: res, data };
}

export function legendRange(payload: HeatmapPayload): { min: number; max: number } {
  return { min: Math.min(...payload.values), max: Math.max(...payload.values) };
}
