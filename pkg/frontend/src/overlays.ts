/* Pure rendering helpers: everything here returns plain pixel buffers or
 * point lists so the logic is testable without a DOM; main.ts blits the
 * results onto canvases. */

import type { ContourJson, FieldPlanes, GrayImage } from "./api.js";

export interface RgbaBuffer {
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA
}

export function grayToRgba(img: GrayImage): RgbaBuffer {
  const data = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.samples.length; i++) {
    const v = Math.max(0, Math.min(255, Math.round(img.samples[i] * 255)));
    data[4 * i] = v;
    data[4 * i + 1] = v;
    data[4 * i + 2] = v;
    data[4 * i + 3] = 255;
  }
  return { width: img.width, height: img.height, data };
}

/* Translucent single-color mask layer (used for the tube overlay). */
export function maskToRgba(
  mask: GrayImage,
  rgba: [number, number, number, number],
): RgbaBuffer {
  const data = new Uint8ClampedArray(mask.width * mask.height * 4);
  for (let i = 0; i < mask.samples.length; i++) {
    if (mask.samples[i] > 0.5) {
      data[4 * i] = rgba[0];
      data[4 * i + 1] = rgba[1];
      data[4 * i + 2] = rgba[2];
      data[4 * i + 3] = rgba[3];
    }
  }
  return { width: mask.width, height: mask.height, data };
}

/* Signed heatmap: negative values blue, positive red, alpha by magnitude. */
export function signedHeatmap(field: FieldPlanes, planeIdx = 0): RgbaBuffer {
  const plane = field.planes[planeIdx];
  let maxAbs = 1e-30;
  for (const v of plane) maxAbs = Math.max(maxAbs, Math.abs(v));
  const data = new Uint8ClampedArray(field.width * field.height * 4);
  for (let i = 0; i < plane.length; i++) {
    const t = plane[i] / maxAbs; // [-1, 1]
    data[4 * i] = t > 0 ? 230 : 40;
    data[4 * i + 1] = 50;
    data[4 * i + 2] = t > 0 ? 40 : 230;
    data[4 * i + 3] = Math.round(200 * Math.abs(t));
  }
  return { width: field.width, height: field.height, data };
}

export interface Arrow {
  x: number;
  y: number;
  dx: number;
  dy: number;
}

/* Decimated arrow field for a 2-plane vector field: one arrow per `step`
 * cells, scaled so the longest arrow spans ~step pixels. */
export function arrowField(field: FieldPlanes, step = 12): Arrow[] {
  if (field.planes.length < 2) throw new Error("vector field needs 2 planes");
  const [vx, vy] = field.planes;
  let maxMag = 1e-30;
  for (let i = 0; i < vx.length; i++) {
    maxMag = Math.max(maxMag, Math.hypot(vx[i], vy[i]));
  }
  const scale = (0.9 * step) / maxMag;
  const arrows: Arrow[] = [];
  for (let y = Math.floor(step / 2); y < field.height; y += step) {
    for (let x = Math.floor(step / 2); x < field.width; x += step) {
      const i = y * field.width + x;
      const mag = Math.hypot(vx[i], vy[i]);
      if (mag < 0.02 * maxMag) continue;
      arrows.push({ x, y, dx: vx[i] * scale, dy: vy[i] * scale });
    }
  }
  return arrows;
}

/* Closed contour to a flat draw list in image coordinates. */
export function contourPath(contour: ContourJson): [number, number][] {
  const pts = contour.points.slice();
  if (contour.closed && pts.length > 0) pts.push(pts[0]);
  return pts;
}

/* Image <-> canvas transform, device-pixel-ratio aware.  The image is
 * fitted into the canvas preserving aspect; pixel (x, y) maps to canvas
 * point (x + 0.5, y + 0.5) * scale + offset so cell centers land in the
 * middle of their displayed pixels. */
export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function fitTransform(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): ViewTransform {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function toCanvas(
  t: ViewTransform,
  x: number,
  y: number,
): [number, number] {
  return [(x + 0.5) * t.scale + t.offsetX, (y + 0.5) * t.scale + t.offsetY];
}

export function toImage(
  t: ViewTransform,
  cx: number,
  cy: number,
): [number, number] {
  return [(cx - t.offsetX) / t.scale - 0.5, (cy - t.offsetY) / t.scale - 0.5];
}

/* Sparkline points for the energy trail, normalized into a w x h box. */
export function sparkline(
  values: number[],
  w: number,
  h: number,
): [number, number][] {
  if (values.length === 0) return [];
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  return values.map((v, i) => [
    (i / Math.max(values.length - 1, 1)) * w,
    h - ((v - lo) / span) * h,
  ]);
}
