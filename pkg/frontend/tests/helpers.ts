import { readFileSync } from "node:fs";

export function fixture<T = any>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

export interface RecordedCall {
  method: string;
  url: string;
  body: any;
}

interface Route {
  method: string;
  pattern: RegExp;
  responses: unknown[]; // consumed in order; the last one sticks
  status: number;
  raw: boolean;
}

/** Fixture-backed stand-in for the service: routes requests to canned
 * payloads and records every call for assertions. */
export class FetchMock {
  calls: RecordedCall[] = [];
  private routes: Route[] = [];
  failNext = false;

  on(method: string, pattern: RegExp, payload: unknown | unknown[], status = 200, raw = false): this {
    const responses = Array.isArray(payload) && !raw ? [...payload] : [payload];
    this.routes.push({ method, pattern, responses, status, raw });
    return this;
  }

  handler = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    if (this.failNext) {
      this.failNext = false;
      throw new TypeError("network failure");
    }
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ method, url, body });
    // later registrations take precedence so tests can override routes
    for (const route of [...this.routes].reverse()) {
      if (route.method === method && route.pattern.test(url)) {
        const payload = route.responses.length > 1 ? route.responses.shift() : route.responses[0];
        if (route.raw) {
          return new Response(String(payload), { status: route.status });
        }
        return new Response(JSON.stringify(payload), {
          status: route.status,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    throw new Error(`unrouted request: ${method} ${url}`);
  };

  countMatching(method: string, pattern: RegExp): number {
    return this.calls.filter((c) => c.method === method && pattern.test(c.url)).length;
  }
}
