// Session state: everything needed to reproduce a preview.

export interface SessionState {
  canvasPng: string; // base64 PNG of the current canvas raster
  brushSize: number;
  eraser: boolean;
  domain: string;
  gamma: number; // always clamped to [0, 1]
  seed: number;
  serverUrl: string;
  lastLatencyMs: number | null;
}

export const CANVAS_SIZE = 256; // fixed; the server may downscale to model size

export function defaultSession(serverUrl: string, domain = "night"): SessionState {
  return {
    canvasPng: "",
    brushSize: 6,
    eraser: false,
    domain,
    gamma: 1.0,
    seed: 0,
    serverUrl,
    lastLatencyMs: null,
  };
}

export function clampGamma(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

export function reseed(state: SessionState, rng: () => number = Math.random): SessionState {
  return { ...state, seed: Math.floor(rng() * 2 ** 31) };
}

export function withGamma(state: SessionState, value: number): SessionState {
  return { ...state, gamma: clampGamma(value) };
}

const SESSION_FIELDS: Array<keyof SessionState> = [
  "canvasPng", "brushSize", "eraser", "domain", "gamma", "seed", "serverUrl", "lastLatencyMs",
];

/** Serialize a session to JSON (the exported file reproduces the preview). */
export function exportSession(state: SessionState): string {
  return JSON.stringify(state, SESSION_FIELDS as string[], 2);
}

export function importSession(json: string): SessionState {
  let raw: unknown;
  try {
    raw = JSON.parse(json);
  } catch (err) {
    throw new Error(`session file is not valid JSON: ${err}`);
  }
  const obj = raw as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) throw new Error("session file must hold an object");
  for (const key of ["canvasPng", "domain", "gamma", "seed", "serverUrl"]) {
    if (!(key in obj)) throw new Error(`session file is missing '${key}'`);
  }
  if (typeof obj.gamma !== "number" || typeof obj.seed !== "number") {
    throw new Error("session gamma/seed must be numbers");
  }
  return {
    canvasPng: String(obj.canvasPng),
    brushSize: typeof obj.brushSize === "number" ? obj.brushSize : 6,
    eraser: Boolean(obj.eraser),
    domain: String(obj.domain),
    gamma: clampGamma(obj.gamma),
    seed: obj.seed,
    serverUrl: String(obj.serverUrl),
    lastLatencyMs: typeof obj.lastLatencyMs === "number" ? obj.lastLatencyMs : null,
  };
}
