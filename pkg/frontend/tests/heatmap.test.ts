import { describe, expect, it } from "vitest";

import { HeatmapResolutionError, heatmapToRgba, legendRange } from "../src/heatmap.js";
import type { HeatmapPayload } from "../src/types.js";

function payload(res: number, values: number[]): HeatmapPayload {
  return { landmark: 0, res, version: 1, extent: { x0: 0, x1: 1, y0: 0, y1: 1 }, values };
}

describe("heatmapToRgba", () => {
  it("maps a uniform grid to uniform full opacity", () => {
    const buf = heatmapToRgba(payload(2, [0.25, 0.25, 0.25, 0.25]), 1.0);
    const alphas = [3, 7, 11, 15].map((i) => buf.data[i]);
    expect(new Set(alphas).size).toBe(1);
    expect(alphas[0]).toBe(255); // every cell is the max cell
  });

  it("puts full opacity on the single bright cell only", () => {
    const buf = heatmapToRgba(payload(2, [0, 0, 1, 0]), 1.0);
    expect(buf.data[2 * 4 + 3]).toBe(255);
    expect(buf.data[0 * 4 + 3]).toBe(0);
    expect(buf.data[1 * 4 + 3]).toBe(0);
    expect(buf.data[3 * 4 + 3]).toBe(0);
  });

  it("scales alpha by the maxAlpha knob", () => {
    const buf = heatmapToRgba(payload(1, [0.7]), 0.5);
    expect(buf.data[3]).toBe(Math.round(0.5 * 255));
  });

  it("rejects mismatched resolution", () => {
    expect(() => heatmapToRgba(payload(3, [1, 2, 3]))).toThrow(HeatmapResolutionError);
  });

  it("an all-zero grid renders fully transparent", () => {
    const buf = heatmapToRgba(payload(2, [0, 0, 0, 0]));
    const alphas = [3, 7, 11, 15].map((i) => buf.data[i]);
    expect(alphas).toEqual([0, 0, 0, 0]);
  });
});

describe("legendRange", () => {
  it("reports min and max density", () => {
    expect(legendRange(payload(2, [0.1, 0.4, 0.2, 0.3]))).toEqual({ min: 0.1, max: 0.4 });
  });
});
