// Thin typed client over the analysis service. Every number the explorer
// renders comes from these calls; nothing is recomputed client-side
// beyond formatting.

import type {
  BlockedBaselineDoc,
  GraphDoc,
  NodeDoc,
  RankedDoc,
  SessionInfo,
  TopkDoc,
  WindowsDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private async get<T>(path: string, params?: Record<string, string>): Promise<T> {
    const url = new URL(this.baseUrl + path);
    for (const [key, value] of Object.entries(params ?? {})) {
      url.searchParams.set(key, value);
    }
    const resp = await fetch(url);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        detail = ((await resp.json()) as { error?: string }).error ?? detail;
      } catch {
        // keep statusText
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async createSession(
    tracePath: string,
    targets: string[],
    config?: Record<string, unknown>,
  ): Promise<SessionInfo> {
    const resp = await fetch(this.baseUrl + "/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ trace_path: tracePath, targets, config: config ?? {} }),
    });
    if (!resp.ok) {
      const body = (await resp.json()) as { error?: string };
      throw new ApiError(resp.status, body.error ?? resp.statusText);
    }
    return (await resp.json()) as SessionInfo;
  }

  listSessions(): Promise<{ sessions: Omit<SessionInfo, "nodes" | "edges">[] }> {
    return this.get(`/sessions`);
  }

  graph(sid: string): Promise<GraphDoc> {
    return this.get(`/sessions/${sid}/graph`);
  }

  node(sid: string, nodeId: string): Promise<NodeDoc> {
    return this.get(`/sessions/${sid}/node/${nodeId}`);
  }

  topk(sid: string, k: number, target?: string, fix?: Record<string, string>): Promise<TopkDoc> {
    const params: Record<string, string> = { k: String(k) };
    if (target) params.target = target;
    if (fix && Object.keys(fix).length) {
      params.fix = Object.entries(fix)
        .map(([f, v]) => `${f}=${v}`)
        .join(",");
    }
    return this.get(`/sessions/${sid}/topk`, params);
  }

  aggressive(sid: string, k: number): Promise<RankedDoc> {
    return this.get(`/sessions/${sid}/aggressive`, { k: String(k) });
  }

  slowNodes(sid: string): Promise<RankedDoc> {
    return this.get(`/sessions/${sid}/slownodes`);
  }

  hotResources(sid: string): Promise<RankedDoc> {
    return this.get(`/sessions/${sid}/hotresources`);
  }

  windows(sid: string, bounds: [number, number][], target?: string): Promise<WindowsDoc> {
    const params: Record<string, string> = {
      bounds: bounds.map(([a, b]) => `${a}:${b}`).join(","),
    };
    if (target) params.target = target;
    return this.get(`/sessions/${sid}/windows`, params);
  }

  baselineRanked(sid: string, method: "naive" | "deep", target?: string): Promise<RankedDoc> {
    const params: Record<string, string> = { method };
    if (target) params.target = target;
    return this.get(`/sessions/${sid}/baseline`, params);
  }

  baselineBlocked(sid: string, target?: string): Promise<BlockedBaselineDoc> {
    const params: Record<string, string> = { method: "blocked" };
    if (target) params.target = target;
    return this.get(`/sessions/${sid}/baseline`, params);
  }
}
