// HTTP client for the translation service (JSON + base64 PNG payloads).

export interface TranslateRequest {
  image: string; // base64 PNG
  domain: string;
  gamma: number;
  seed: number;
  model?: string;
}

export interface TranslateResponse {
  image: string; // base64 PNG
  latency_ms: number;
  gamma: number;
  seed: number;
}

export interface HealthInfo {
  status: string;
  model_id: string;
  config_hash: string;
}

export type Transport = (req: TranslateRequest) => Promise<TranslateResponse>;

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServerError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Build a Transport that POSTs to `serverUrl`/translate. */
export function httpTransport(serverUrl: string, fetchFn: FetchLike = fetch): Transport {
  const base = serverUrl.replace(/\/+$/, "");
  return async (req: TranslateRequest) => {
    const resp = await fetchFn(`${base}/translate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ServerError(resp.status, body?.error ?? `HTTP ${resp.status}`);
    }
    return body as TranslateResponse;
  };
}

export async function fetchHealth(serverUrl: string, fetchFn: FetchLike = fetch): Promise<HealthInfo> {
  const base = serverUrl.replace(/\/+$/, "");
  const resp = await fetchFn(`${base}/health`);
  if (!resp.ok) throw new ServerError(resp.status, `health check failed: HTTP ${resp.status}`);
  return (await resp.json()) as HealthInfo;
}
