// Thin HTTP helpers for the gateway's mutation endpoints. Effects come
// back through the event stream; these only report request acceptance.

export interface GatewayError {
  status: number;
  detail: string;
}

export interface Injection {
  kind: "fire" | "ppe" | "accident";
  target: string;
  value?: number | string;
  x?: number;
  y?: number;
}

async function post(url: string, body: unknown, method = "POST"): Promise<GatewayError | null> {
  const resp = await fetch(url, {
    method,
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (resp.ok) return null;
  let detail = resp.statusText;
  try {
    const parsed = await resp.json();
    detail = typeof parsed.detail === "string" ? parsed.detail : JSON.stringify(parsed.detail);
  } catch {
    // keep statusText
  }
  return { status: resp.status, detail };
}

export class GatewayClient {
  constructor(private base: string) {}

  inject(body: Injection): Promise<GatewayError | null> {
    return post(`${this.base}/inject`, body);
  }

  ack(incidentId: string): Promise<GatewayError | null> {
    return post(`${this.base}/ack`, { incident_id: incidentId });
  }

  patchConfig(patch: Record<string, unknown>): Promise<GatewayError | null> {
    return post(`${this.base}/config`, patch, "PATCH");
  }

  async state(): Promise<any> {
    const resp = await fetch(`${this.base}/state`);
    if (!resp.ok) throw new Error(`state HTTP ${resp.status}`);
    return resp.json();
  }
}
