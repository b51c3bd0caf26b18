/* Client-side session state.
 *
 * The server owns all segmentation state; this mirror tracks what the UI
 * needs between calls: the landmark list in click order, pending/stage
 * flags, overlay toggles and the parameter panel.  The whole UI state
 * serializes to a URL-safe string so a reload can restore the session.
 */

export type Stage =
  | "empty"
  | "new"
  | "initialized"
  | "evolving"
  | "converged"
  | "error";

export type OverlayKind = "contour" | "tube" | "xi" | "omega";

export interface PanelConfig {
  model: string;
  alpha_tilde: number;
  beta_data: number;
  beta_aniso: number;
  tube_width: number;
  upsilon: number;
  init_method: string;
  seed: number;
}

export const DEFAULT_PANEL: PanelConfig = {
  model: "piecewise_constant",
  alpha_tilde: 6.0,
  beta_data: 2.0,
  beta_aniso: 1.0,
  tube_width: 15.0,
  upsilon: 0.2,
  init_method: "polygon",
  seed: 0,
};

export interface UiSession {
  serverId: string | null;
  imageSize: [number, number] | null;
  landmarks: [number, number][];
  stage: Stage;
  iteration: number;
  stepped: boolean; // at least one step ran (landmark edits need confirm)
  overlays: Record<OverlayKind, boolean>;
  panel: PanelConfig;
  energyTrail: number[];
  areaTrail: number[];
}

export function emptySession(): UiSession {
  return {
    serverId: null,
    imageSize: null,
    landmarks: [],
    stage: "empty",
    iteration: 0,
    stepped: false,
    overlays: { contour: true, tube: false, xi: false, omega: false },
    panel: { ...DEFAULT_PANEL },
    energyTrail: [],
    areaTrail: [],
  };
}

export function insideImage(s: UiSession, x: number, y: number): boolean {
  if (!s.imageSize) return false;
  return x >= 0 && y >= 0 && x <= s.imageSize[0] - 1 && y <= s.imageSize[1] - 1;
}

/* Append a click as a landmark.  Returns false (unchanged list) for clicks
 * outside the image or closer than 2 px to an existing point. */
export function placeLandmark(s: UiSession, x: number, y: number): boolean {
  if (!insideImage(s, x, y)) return false;
  for (const [px, py] of s.landmarks) {
    if (Math.hypot(px - x, py - y) < 2.0) return false;
  }
  s.landmarks.push([x, y]);
  return true;
}

export function moveLandmark(
  s: UiSession,
  index: number,
  x: number,
  y: number,
): boolean {
  if (index < 0 || index >= s.landmarks.length) return false;
  if (!insideImage(s, x, y)) return false;
  s.landmarks[index] = [x, y];
  return true;
}

/* Landmark edits after the first step require an explicit confirmation and
 * reset the evolution (the server re-initializes on the next PUT). */
export function editRequiresReset(s: UiSession): boolean {
  return s.stepped;
}

export function recordStep(
  s: UiSession,
  iteration: number,
  energy: number | null,
  areaDelta: number | null,
  converged: boolean,
): void {
  s.iteration = iteration;
  s.stepped = s.stepped || iteration > 0;
  if (energy !== null) s.energyTrail.push(energy);
  if (areaDelta !== null) s.areaTrail.push(areaDelta);
  s.stage = converged ? "converged" : iteration > 0 ? "evolving" : s.stage;
}

export function resetEvolution(s: UiSession): void {
  s.iteration = 0;
  s.stepped = false;
  s.energyTrail = [];
  s.areaTrail = [];
  s.stage = s.serverId ? "initialized" : "empty";
}

export function toggleOverlay(s: UiSession, kind: OverlayKind): boolean {
  s.overlays[kind] = !s.overlays[kind];
  return s.overlays[kind];
}

/* ---- URL-safe serialization ------------------------------------------ */

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

function toBase64Url(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const a = bytes[i];
    const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += B64[a >> 2] + B64[((a & 3) << 4) | (b >> 4)];
    if (i + 1 < bytes.length) out += B64[((b & 15) << 2) | (c >> 6)];
    if (i + 2 < bytes.length) out += B64[c & 63];
  }
  return out;
}

function fromBase64Url(text: string): Uint8Array {
  const idx = new Map<string, number>();
  for (let i = 0; i < B64.length; i++) idx.set(B64[i], i);
  const vals: number[] = [];
  for (const ch of text) {
    const v = idx.get(ch);
    if (v === undefined) throw new Error("invalid serialized state");
    vals.push(v);
  }
  const out: number[] = [];
  for (let i = 0; i + 1 < vals.length; i += 4) {
    out.push((vals[i] << 2) | (vals[i + 1] >> 4));
    if (i + 2 < vals.length) {
      out.push(((vals[i + 1] & 15) << 4) | (vals[i + 2] >> 2));
    }
    if (i + 3 < vals.length) {
      out.push(((vals[i + 2] & 3) << 6) | vals[i + 3]);
    }
  }
  return new Uint8Array(out);
}

export function serializeSession(s: UiSession): string {
  const compact = {
    id: s.serverId,
    sz: s.imageSize,
    lm: s.landmarks,
    st: s.stage,
    it: s.iteration,
    sp: s.stepped,
    ov: s.overlays,
    pc: s.panel,
  };
  return toBase64Url(new TextEncoder().encode(JSON.stringify(compact)));
}

export function deserializeSession(text: string): UiSession {
  const obj = JSON.parse(new TextDecoder().decode(fromBase64Url(text)));
  const s = emptySession();
  s.serverId = obj.id ?? null;
  s.imageSize = obj.sz ?? null;
  s.landmarks = obj.lm ?? [];
  s.stage = obj.st ?? "empty";
  s.iteration = obj.it ?? 0;
  s.stepped = obj.sp ?? false;
  s.overlays = { ...s.overlays, ...(obj.ov ?? {}) };
  s.panel = { ...s.panel, ...(obj.pc ?? {}) };
  return s;
}
