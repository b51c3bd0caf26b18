/* REST client for the segmentation session service.
 *
 * All segmentation state lives on the server; this module only wraps the
 * documented endpoints and decodes the artifact formats (PGM masks, RSF1
 * field planes, contour JSON).
 */

export interface ContourJson {
  closed: boolean;
  points: [number, number][];
}

export interface StepResponse {
  v: number;
  id: string;
  stage: string;
  iteration: number;
  energy: number | null;
  area_delta: number | null;
  converged: boolean;
  contour: ContourJson;
}

export interface SessionInfo {
  v: number;
  id: string;
  width: number;
  height: number;
  stage: string;
}

export interface GrayImage {
  width: number;
  height: number;
  /* row-major samples in [0, 1] */
  samples: Float32Array;
}

export interface FieldPlanes {
  width: number;
  height: number;
  spacing: number;
  planes: Float32Array[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class SessionClient {
  constructor(
    public baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async createSession(imageBytes: Uint8Array): Promise<SessionInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/octet-stream" },
      body: imageBytes as unknown as BodyInit,
    });
    return expectJson<SessionInfo>(resp);
  }

  async putLandmarks(
    id: string,
    points: [number, number][],
  ): Promise<StepResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}/landmarks`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, points }),
    });
    return expectJson<StepResponse>(resp);
  }

  async putConfig(
    id: string,
    config: Record<string, unknown>,
  ): Promise<unknown> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${id}/config`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, ...config }),
    });
    return expectJson<unknown>(resp);
  }

  async step(id: string, n = 1): Promise<StepResponse> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/sessions/${id}/step?n=${n}`,
      { method: "POST" },
    );
    return expectJson<StepResponse>(resp);
  }

  async artifact(id: string, kind: string): Promise<Uint8Array> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/sessions/${id}/artifacts/${kind}`,
    );
    if (!resp.ok) throw new ApiError(resp.status, `no artifact ${kind}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async contour(id: string): Promise<ContourJson> {
    const bytes = await this.artifact(id, "contour.json");
    return JSON.parse(new TextDecoder().decode(bytes)) as ContourJson;
  }
}

/* ---- artifact decoding ---------------------------------------------- */

export function parsePgm(bytes: Uint8Array): GrayImage {
  const header = new TextDecoder().decode(bytes.slice(0, 64));
  if (!header.startsWith("P5")) throw new Error("not a binary PGM");
  // magic, width, height, maxval separated by whitespace
  const m = header.match(/^P5\s+(\d+)\s+(\d+)\s+(\d+)\s/);
  if (!m) throw new Error("malformed PGM header");
  const [, w, h, maxval] = m;
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  const offset = m[0].length;
  const data = bytes.slice(offset, offset + width * height);
  if (data.length !== width * height) throw new Error("truncated PGM");
  const samples = new Float32Array(width * height);
  const max = parseInt(maxval, 10);
  for (let i = 0; i < samples.length; i++) samples[i] = data[i] / max;
  return { width, height, samples };
}

export function encodePgm(img: GrayImage): Uint8Array {
  const header = `P5\n${img.width} ${img.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + img.width * img.height);
  out.set(head, 0);
  for (let i = 0; i < img.samples.length; i++) {
    out[head.length + i] = Math.max(
      0,
      Math.min(255, Math.round(img.samples[i] * 255)),
    );
  }
  return out;
}

export function parseRsf1(bytes: Uint8Array): FieldPlanes {
  const magic = new TextDecoder().decode(bytes.slice(0, 4));
  if (magic !== "RSF1") throw new Error("not an RSF1 field");
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const spacing = view.getFloat32(12, true);
  const body = bytes.length - 16;
  const per = width * height * 4;
  if (body % per !== 0) throw new Error("RSF1 payload size mismatch");
  const planes: Float32Array[] = [];
  for (let k = 0; k < body / per; k++) {
    const plane = new Float32Array(width * height);
    for (let i = 0; i < plane.length; i++) {
      plane[i] = view.getFloat32(16 + k * per + i * 4, true);
    }
    planes.push(plane);
  }
  return { width, height, spacing, planes };
}
