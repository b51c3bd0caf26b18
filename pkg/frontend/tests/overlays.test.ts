import { describe, expect, it } from "vitest";

import type { FieldPlanes, GrayImage } from "../src/api.js";
import {
  arrowField,
  contourPath,
  fitTransform,
  grayToRgba,
  maskToRgba,
  signedHeatmap,
  sparkline,
  toCanvas,
  toImage,
} from "../src/overlays.js";

function gray(w: number, h: number, fill: (i: number) => number): GrayImage {
  const samples = new Float32Array(w * h);
  for (let i = 0; i < samples.length; i++) samples[i] = fill(i);
  return { width: w, height: h, samples };
}

describe("pixel buffers", () => {
  it("converts gray to opaque rgba", () => {
    const buf = grayToRgba(gray(2, 1, (i) => i)); // 0 and 1
    expect([...buf.data]).toEqual([0, 0, 0, 255, 255, 255, 255, 255]);
  });

  it("masks become translucent single-color layers", () => {
    const buf = maskToRgba(gray(2, 1, (i) => i), [10, 20, 30, 90]);
    expect(buf.data[3]).toBe(0); // off pixel fully transparent
    expect([...buf.data.slice(4)]).toEqual([10, 20, 30, 90]);
  });

  it("signed heatmap encodes sign in hue and magnitude in alpha", () => {
    const field: FieldPlanes = {
      width: 3,
      height: 1,
      spacing: 1,
      planes: [new Float32Array([-2, 0, 1])],
    };
    const buf = signedHeatmap(field);
    expect(buf.data[2]).toBe(230); // negative: blue channel
    expect(buf.data[3]).toBe(200); // full magnitude
    expect(buf.data[7]).toBe(0); // zero value invisible
    expect(buf.data[8]).toBe(230); // positive: red channel
    expect(buf.data[11]).toBe(100); // half magnitude
  });
});

describe("arrow decimation", () => {
  it("keeps one scaled arrow per block and drops tiny vectors", () => {
    const w = 24;
    const h = 24;
    const vx = new Float32Array(w * h);
    const vy = new Float32Array(w * h);
    for (let i = 0; i < vx.length; i++) {
      vx[i] = 2.0;
      vy[i] = 0.0;
    }
    vx[6 * w + 6] = 1e-6; // a sampled block with a negligible vector
    const field: FieldPlanes = { width: w, height: h, spacing: 1,
                                 planes: [vx, vy] };
    const arrows = arrowField(field, 12);
    expect(arrows.length).toBe(3); // 2x2 blocks minus the tiny one
    for (const a of arrows) {
      expect(Math.hypot(a.dx, a.dy)).toBeCloseTo(0.9 * 12, 6);
      expect(a.dy).toBeCloseTo(0, 12);
    }
  });
});

describe("transforms", () => {
  it("fits the image into the canvas and round-trips coordinates", () => {
    const t = fitTransform(100, 50, 400, 400);
    expect(t.scale).toBe(4);
    expect(t.offsetY).toBe(100); // letterboxed vertically
    const [cx, cy] = toCanvas(t, 10, 20);
    const [x, y] = toImage(t, cx, cy);
    expect(x).toBeCloseTo(10, 9);
    expect(y).toBeCloseTo(20, 9);
  });
});

describe("contour path and sparkline", () => {
  it("closes contours for drawing", () => {
    const pts = contourPath({ closed: true, points: [[0, 0], [1, 0], [0, 1]] });
    expect(pts.length).toBe(4);
    expect(pts[3]).toEqual([0, 0]);
  });

  it("normalizes the sparkline into the box", () => {
    const pts = sparkline([5, 1, 3], 100, 50);
    expect(pts[0]).toEqual([0, 0]);    // max at the top
    expect(pts[1]).toEqual([50, 50]);  // min at the bottom
    expect(pts[2][0]).toBe(100);
  });
});
