/** View state and its transitions. Mirrors derive only from service
 * responses; there is no client-side physics or geometry math beyond
 * coordinate transforms. */

import { Api, ApiError } from "./api.js";
import type {
  ChatMessage,
  CostfieldResponse,
  RunStatus,
  StateResponse,
  TraceRecord,
} from "./types.js";

export interface ViewState {
  sessionId: string | null;
  state: StateResponse | null;
  costfield: CostfieldResponse | null;
  selectedRun: RunStatus | null;
  trace: TraceRecord[] | null;
  playbackIndex: number;
  chat: ChatMessage[];
  banner: string | null;
  chatRetryAvailable: boolean;
  shakePoint: number | null;
  staleSession: boolean;
  activeRunId: string | null;
}

export function parseTraceJsonl(text: string): TraceRecord[] {
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as TraceRecord);
}

export class Store {
  view: ViewState = {
    sessionId: null,
    state: null,
    costfield: null,
    selectedRun: null,
    trace: null,
    playbackIndex: 0,
    chat: [],
    banner: null,
    chatRetryAvailable: false,
    shakePoint: null,
    staleSession: false,
    activeRunId: null,
  };

  constructor(
    public api: Api,
    private onChange: (view: ViewState) => void = () => {},
  ) {}

  private notify() {
    this.onChange(this.view);
  }

  async init(body: { seed?: number; n_obstacles?: number; n_ctrl?: number } = {}): Promise<void> {
    const { id } = await this.api.createSession(body);
    this.view.sessionId = id;
    await this.refetchState();
    await this.refetchCostfield();
  }

  async refetchState(): Promise<void> {
    if (!this.view.sessionId) return;
    try {
      this.view.state = await this.api.getState(this.view.sessionId);
      this.view.staleSession = false;
    } catch (e) {
      if (e instanceof ApiError && e.status === 404) {
        this.view.staleSession = true; // prompt the user to re-create
      } else {
        throw e;
      }
    }
    this.notify();
  }

  async refetchCostfield(res = 100): Promise<void> {
    if (!this.view.sessionId) return;
    this.view.costfield = await this.api.getCostfield(this.view.sessionId, res);
    this.notify();
  }

  /** True when the point may be dragged (interior control points only). */
  canDrag(index: number): boolean {
    const s = this.view.state;
    if (!s) return false;
    return !s.fixed_indices.includes(index);
  }

  /** Drop a dragged control point onto a grid cell: command then refetch. */
  async endDrag(index: number, grid: [number, number]): Promise<boolean> {
    if (!this.view.sessionId || !this.view.state) return false;
    if (!this.canDrag(index)) {
      this.view.shakePoint = index; // visual rejection, no request
      this.notify();
      return false;
    }
    this.view.shakePoint = null;
    await this.api.postCommands(this.view.sessionId, [
      { type: "modify_ctrl_point", index, position: grid },
    ]);
    await this.refetchState();
    return true;
  }

  clearShake(): void {
    this.view.shakePoint = null;
    this.notify();
  }

  /** One active run per session, mirroring the service's 409 rule. */
  get optimizeBusy(): boolean {
    const run = this.view.selectedRun;
    return (
      this.view.activeRunId !== null &&
      run !== null &&
      (run.status === "queued" || run.status === "running")
    );
  }

  async startOptimize(body: Record<string, unknown>): Promise<string> {
    if (!this.view.sessionId) throw new Error("no session");
    const { run_id } = await this.api.optimize(this.view.sessionId, body);
    this.view.activeRunId = run_id;
    this.view.selectedRun = null;
    this.view.trace = null;
    this.notify();
    return run_id;
  }

  /** One polling step; returns true when the run reached a terminal state. */
  async pollRunOnce(): Promise<boolean> {
    const sid = this.view.sessionId;
    const rid = this.view.activeRunId;
    if (!sid || !rid) return true;
    const status = await this.api.getRun(sid, rid, true);
    this.view.selectedRun = status;
    this.notify();
    if (status.status === "done") {
      this.view.trace = parseTraceJsonl(await this.api.getTrace(sid, rid));
      this.view.playbackIndex = (status.theta_history?.length ?? 1) - 1;
      this.notify();
      return true;
    }
    return status.status === "error";
  }

  /** Load a finished run (with history and trace) for playback. */
  async selectRun(rid: string): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    this.view.selectedRun = await this.api.getRun(sid, rid, true);
    this.view.trace = parseTraceJsonl(await this.api.getTrace(sid, rid));
    this.view.playbackIndex = 0;
    this.notify();
  }

  /** Clamp the scrubber into the recorded history. */
  setPlaybackIndex(index: number): number {
    const n = this.view.selectedRun?.theta_history?.length ?? 0;
    const clamped = n === 0 ? 0 : Math.min(Math.max(index, 0), n - 1);
    this.view.playbackIndex = clamped;
    this.notify();
    return clamped;
  }

  /** Send one chat message; state-changing tool calls refresh the world. */
  async sendChat(message: string): Promise<void> {
    const sid = this.view.sessionId;
    if (!sid) return;
    this.view.chatRetryAvailable = false;
    this.view.banner = null;
    let resp;
    try {
      resp = await this.api.chat(sid, message);
    } catch (e) {
      if (e instanceof ApiError && e.status === 503) {
        this.view.banner = "no LM configured";
      } else {
        this.view.chatRetryAvailable = true; // transcript unchanged
      }
      this.notify();
      return;
    }
    this.view.chat = [
      ...this.view.chat,
      { role: "user", text: message, toolEvents: [] },
      { role: "assistant", text: resp.reply, toolEvents: resp.tool_events },
    ];
    if (resp.tool_events.some((e) => e.tool === "apply_commands")) {
      await this.refetchState();
      await this.refetchCostfield();
    }
    this.notify();
  }
}
