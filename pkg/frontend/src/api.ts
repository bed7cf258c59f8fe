/** Typed client for the session service; issues only documented endpoints. */

import type {
  ChatResponse,
  CommandJson,
  CostfieldResponse,
  CurveResponse,
  RunStatus,
  StateResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let code = "http_error";
    let message = `HTTP ${resp.status}`;
    try {
      const body = await resp.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep defaults
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class Api {
  constructor(public baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  createSession(body: { seed?: number; n_obstacles?: number; n_ctrl?: number }): Promise<{ id: string }> {
    return request(this.url("/api/sessions"), post(body));
  }

  getState(sid: string): Promise<StateResponse> {
    return request(this.url(`/api/sessions/${sid}/state`));
  }

  postCommands(sid: string, commands: CommandJson[]): Promise<{ applied: number }> {
    return request(this.url(`/api/sessions/${sid}/commands`), post({ commands }));
  }

  parseCommands(sid: string, text: string): Promise<{ commands: CommandJson[] }> {
    return request(this.url(`/api/sessions/${sid}/commands/parse`), post({ text }));
  }

  optimize(sid: string, body: Record<string, unknown>): Promise<{ run_id: string }> {
    return request(this.url(`/api/sessions/${sid}/optimize`), post(body));
  }

  getRun(sid: string, rid: string, includeHistory = false): Promise<RunStatus> {
    const suffix = includeHistory ? "?include_history=true" : "";
    return request(this.url(`/api/sessions/${sid}/runs/${rid}${suffix}`));
  }

  async getTrace(sid: string, rid: string): Promise<string> {
    const resp = await fetch(this.url(`/api/sessions/${sid}/runs/${rid}/trace`));
    if (!resp.ok) {
      throw new ApiError(resp.status, "trace_unavailable", `HTTP ${resp.status}`);
    }
    return resp.text();
  }

  getCurve(sid: string, rid: string, iter: number, samples = 200): Promise<CurveResponse> {
    return request(this.url(`/api/sessions/${sid}/runs/${rid}/curve?iter=${iter}&samples=${samples}`));
  }

  getDescription(sid: string, rid: string, type: "full" | "steps" | "updates"): Promise<{ description: string }> {
    return request(this.url(`/api/sessions/${sid}/runs/${rid}/description?type=${type}`));
  }

  getCostfield(sid: string, res = 100): Promise<CostfieldResponse> {
    return request(this.url(`/api/sessions/${sid}/costfield?res=${res}`));
  }

  chat(sid: string, message: string): Promise<ChatResponse> {
    return request(this.url(`/api/sessions/${sid}/chat`), post({ message }));
  }
}
