/** Payload shapes of the service API (the only backend this app talks to). */

export interface ObstacleJson {
  nickname: string;
  center: [number, number];
  radius: number;
  penalty: number;
  cost: number;
}

export interface ScenarioJson {
  seed: number;
  physics: Record<string, number>;
  cost_field: Record<string, number>;
  ctrl_points: [number, number][];
  obstacles: ObstacleJson[];
}

export interface StateResponse {
  scenario: ScenarioJson;
  path_samples: [number, number][];
  fixed_indices: number[];
}

export interface CostfieldResponse {
  res: number;
  values: number[]; // row-major, row 0 at the bottom
}

export interface RewardJson {
  time: number;
  cost: number;
  total: number;
  length: number;
}

export interface RunStatus {
  run_id: string;
  status: "queued" | "running" | "done" | "error";
  progress: number;
  config: Record<string, unknown>;
  metrics?: { initial: RewardJson; final: RewardJson };
  theta_history?: [number, number][][];
  error?: string;
}

export interface CurveResponse {
  iter: number;
  samples: [number, number][];
  theta: [number, number][];
}

export interface TraceRecord {
  iter: number;
  kind: "event" | "reward" | "update";
  text: string;
  payload: Record<string, any>;
}

export interface ToolEvent {
  tool: string;
  args: Record<string, unknown>;
  result: string;
}

export interface ChatResponse {
  reply: string;
  tool_events: ToolEvent[];
}

export interface CommandJson {
  type: string;
  nickname?: string;
  center?: [number, number];
  radius?: number;
  penalty?: number;
  cost?: number;
  index?: number;
  position?: [number, number];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export interface ChatMessage {
  role: "user" | "assistant";
  text: string;
  toolEvents: ToolEvent[];
}
