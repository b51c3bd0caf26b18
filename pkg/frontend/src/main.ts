/* Browser entry point: canvas, landmark clicks, parameter panel, stepping
 * controls and overlay toggles.  All segmentation state is authoritative
 * on the server; this file only renders and forwards actions. */

import {
  ApiError,
  SessionClient,
  parsePgm,
  parseRsf1,
  type ContourJson,
  type GrayImage,
} from "./api.js";
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
  type RgbaBuffer,
  type ViewTransform,
} from "./overlays.js";
import {
  DEFAULT_PANEL,
  deserializeSession,
  editRequiresReset,
  emptySession,
  placeLandmark,
  recordStep,
  resetEvolution,
  serializeSession,
  toggleOverlay,
  type OverlayKind,
  type UiSession,
} from "./state.js";

const API_BASE = (window as unknown as { RANDERSGEO_API?: string })
  .RANDERSGEO_API ?? "http://127.0.0.1:8321";

const client = new SessionClient(API_BASE);
let session: UiSession = emptySession();
let image: GrayImage | null = null;
let contour: ContourJson | null = null;
let pending = false;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const sparkCanvas = document.getElementById("spark") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLElement;
const fileInput = document.getElementById("file") as HTMLInputElement;

function transform(): ViewTransform {
  const dpr = window.devicePixelRatio || 1;
  return fitTransform(
    image?.width ?? 1,
    image?.height ?? 1,
    canvas.width / dpr,
    canvas.height / dpr,
  );
}

function setStatus(text: string) {
  statusEl.textContent = text;
}

function toast(text: string) {
  setStatus(text);
  setTimeout(() => render(), 2500);
}

function syncCanvasSize() {
  const dpr = window.devicePixelRatio || 1;
  const rect = canvas.getBoundingClientRect();
  canvas.width = Math.round(rect.width * dpr);
  canvas.height = Math.round(rect.height * dpr);
}

function blit(ctx: CanvasRenderingContext2D, buf: RgbaBuffer, t: ViewTransform) {
  const off = new OffscreenCanvas(buf.width, buf.height);
  const octx = off.getContext("2d")!;
  octx.putImageData(
    new ImageData(new Uint8ClampedArray(buf.data), buf.width, buf.height),
    0,
    0,
  );
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(
    off,
    t.offsetX,
    t.offsetY,
    buf.width * t.scale,
    buf.height * t.scale,
  );
}

const overlayCache = new Map<string, RgbaBuffer>();

async function fetchOverlay(kind: OverlayKind): Promise<RgbaBuffer | null> {
  if (!session.serverId) return null;
  const key = `${kind}:${session.iteration}`;
  const cached = overlayCache.get(key);
  if (cached) return cached;
  try {
    let buf: RgbaBuffer;
    if (kind === "tube") {
      buf = maskToRgba(
        parsePgm(await client.artifact(session.serverId, "tube.pgm")),
        [80, 160, 255, 90],
      );
    } else if (kind === "xi") {
      buf = signedHeatmap(
        parseRsf1(await client.artifact(session.serverId, "xi.rsf1")),
      );
    } else {
      return null;
    }
    overlayCache.set(key, buf);
    return buf;
  } catch {
    return null;
  }
}

async function render() {
  syncCanvasSize();
  const ctx = canvas.getContext("2d")!;
  const dpr = window.devicePixelRatio || 1;
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!image) {
    setStatus("load an image to start");
    return;
  }
  const t = transform();
  blit(ctx, grayToRgba(image), t);

  if (session.overlays.tube) {
    const buf = await fetchOverlay("tube");
    if (buf) blit(ctx, buf, t);
  }
  if (session.overlays.xi) {
    const buf = await fetchOverlay("xi");
    if (buf) blit(ctx, buf, t);
  }
  if (session.overlays.omega && session.serverId) {
    try {
      const field = parseRsf1(
        await client.artifact(session.serverId, "omega.rsf1"),
      );
      ctx.strokeStyle = "#ffe066";
      ctx.lineWidth = 1;
      for (const a of arrowField(field)) {
        const [x0, y0] = toCanvas(t, a.x - a.dx / 2, a.y - a.dy / 2);
        const [x1, y1] = toCanvas(t, a.x + a.dx / 2, a.y + a.dy / 2);
        ctx.beginPath();
        ctx.moveTo(x0, y0);
        ctx.lineTo(x1, y1);
        ctx.stroke();
      }
    } catch {
      /* field not available yet */
    }
  }
  if (session.overlays.contour && contour) {
    ctx.strokeStyle = "#ff4d4d";
    ctx.lineWidth = 2;
    ctx.beginPath();
    contourPath(contour).forEach(([x, y], i) => {
      const [cx, cy] = toCanvas(t, x, y);
      if (i === 0) ctx.moveTo(cx, cy);
      else ctx.lineTo(cx, cy);
    });
    ctx.stroke();
  }
  session.landmarks.forEach(([x, y], i) => {
    const [cx, cy] = toCanvas(t, x, y);
    ctx.fillStyle = "#3bdd3b";
    ctx.beginPath();
    ctx.arc(cx, cy, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#ffffff";
    ctx.font = "11px sans-serif";
    ctx.fillText(String(i + 1), cx + 6, cy - 6);
  });

  const sctx = sparkCanvas.getContext("2d")!;
  sctx.clearRect(0, 0, sparkCanvas.width, sparkCanvas.height);
  sctx.strokeStyle = "#4d94ff";
  sctx.beginPath();
  sparkline(session.energyTrail, sparkCanvas.width, sparkCanvas.height)
    .forEach(([x, y], i) => {
      if (i === 0) sctx.moveTo(x, y);
      else sctx.lineTo(x, y);
    });
  sctx.stroke();

  const last = session.areaTrail[session.areaTrail.length - 1];
  setStatus(
    `stage=${session.stage} iteration=${session.iteration}` +
      (last !== undefined ? ` area-delta=${last.toExponential(2)}` : ""),
  );
  (document.getElementById("step") as HTMLButtonElement).disabled =
    pending || session.stage === "converged" || session.landmarks.length === 0;
  window.location.hash = serializeSession(session);
}

async function pushLandmarks() {
  if (!session.serverId || session.landmarks.length === 0) return;
  try {
    const resp = await client.putLandmarks(
      session.serverId,
      session.landmarks,
    );
    contour = resp.contour;
    resetEvolution(session);
    session.stage = "initialized";
  } catch (e) {
    if (e instanceof ApiError) toast(`landmarks rejected: ${e.message}`);
    else throw e;
  }
  await render();
}

canvas.addEventListener("click", async (ev) => {
  if (!image || pending) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = toImage(
    transform(),
    ev.clientX - rect.left,
    ev.clientY - rect.top,
  );
  if (editRequiresReset(session)) {
    const ok = window.confirm(
      "Adding a landmark resets the evolution. Continue?",
    );
    if (!ok) return;
  }
  if (placeLandmark(session, x, y)) await pushLandmarks();
});

document.getElementById("step")!.addEventListener("click", async () => {
  if (!session.serverId || pending) return;
  const k = parseInt(
    (document.getElementById("nsteps") as HTMLInputElement).value || "1",
    10,
  );
  pending = true;
  await render();
  try {
    const resp = await client.step(session.serverId, k);
    contour = resp.contour;
    recordStep(
      session,
      resp.iteration,
      resp.energy,
      resp.area_delta,
      resp.converged,
    );
  } catch (e) {
    if (e instanceof ApiError) toast(`step failed (${e.status}): ${e.message}`);
    else throw e;
  } finally {
    pending = false;
  }
  await render();
});

for (const kind of ["contour", "tube", "xi", "omega"] as OverlayKind[]) {
  document.getElementById(`ov-${kind}`)!.addEventListener("change", () => {
    toggleOverlay(session, kind);
    void render();
  });
}

document.getElementById("apply-config")!.addEventListener("click", async () => {
  if (!session.serverId) return;
  const panel = { ...DEFAULT_PANEL };
  for (const key of Object.keys(panel) as (keyof typeof panel)[]) {
    const el = document.getElementById(`cfg-${key}`) as HTMLInputElement | null;
    if (!el) continue;
    const v = el.value;
    (panel as Record<string, unknown>)[key] =
      typeof panel[key] === "number" ? parseFloat(v) : v;
  }
  session.panel = panel;
  try {
    await client.putConfig(session.serverId, panel);
    resetEvolution(session);
    if (session.landmarks.length) await pushLandmarks();
  } catch (e) {
    if (e instanceof ApiError) toast(`config rejected: ${e.message}`);
  }
  await render();
});

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  try {
    const info = await client.createSession(bytes);
    session = emptySession();
    session.serverId = info.id;
    session.imageSize = [info.width, info.height];
    session.stage = "new";
    contour = null;
    overlayCache.clear();
    if (file.name.endsWith(".pgm")) {
      image = parsePgm(bytes);
    } else {
      image = await decodeBrowserImage(bytes, info.width, info.height);
    }
  } catch (e) {
    if (e instanceof ApiError) toast(`upload rejected: ${e.message}`);
    else throw e;
  }
  await render();
});

async function decodeBrowserImage(
  bytes: Uint8Array,
  w: number,
  h: number,
): Promise<GrayImage> {
  const bmp = await createImageBitmap(new Blob([bytes as unknown as BlobPart]));
  const off = new OffscreenCanvas(w, h);
  const ctx = off.getContext("2d")!;
  ctx.drawImage(bmp, 0, 0);
  const data = ctx.getImageData(0, 0, w, h).data;
  const samples = new Float32Array(w * h);
  for (let i = 0; i < samples.length; i++) {
    samples[i] =
      (data[4 * i] + data[4 * i + 1] + data[4 * i + 2]) / (3 * 255);
  }
  return { width: w, height: h, samples };
}

if (window.location.hash.length > 1) {
  try {
    session = deserializeSession(window.location.hash.slice(1));
  } catch {
    session = emptySession();
  }
}
window.addEventListener("resize", () => void render());
void render();
