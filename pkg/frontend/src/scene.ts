/** Pure scene construction: world state in, canvas display list out.
 *
 * All geometry is server-sampled; this module only transforms world
 * coordinates ([0,1]^2, y up) into canvas pixels (y down) and decides what
 * to draw. Keeping scenes as plain data makes every view snapshotable.
 */

import type { CostfieldResponse, StateResponse, TraceRecord } from "./types.js";

export type SceneItem =
  | { kind: "heatmap"; res: number; values: number[]; min: number; max: number }
  | { kind: "circle"; x: number; y: number; r: number; color: string; dashed: boolean }
  | { kind: "label"; x: number; y: number; text: string }
  | { kind: "polyline"; points: [number, number][]; color: string; width: number }
  | { kind: "handle"; x: number; y: number; index: number; fixed: boolean; shaking: boolean }
  | { kind: "marker"; x: number; y: number; text: string };

export interface Scene {
  width: number;
  height: number;
  items: SceneItem[];
}

export interface SceneOptions {
  width?: number;
  height?: number;
  shakePoint?: number | null;
}

export function toCanvas(p: [number, number], w: number, h: number): [number, number] {
  return [p[0] * w, (1 - p[1]) * h];
}

export function canvasToWorld(x: number, y: number, w: number, h: number): [number, number] {
  return [x / w, 1 - y / h];
}

export function worldToGrid(p: [number, number]): [number, number] {
  const clamp = (v: number) => Math.min(Math.max(Math.floor(v * 100), 0), 99);
  return [clamp(p[0]), clamp(p[1])];
}

export function gridToWorld(g: [number, number]): [number, number] {
  return [(g[0] + 0.5) / 100, (g[1] + 0.5) / 100];
}

export function buildWorldScene(
  state: StateResponse,
  costfield: CostfieldResponse | null,
  opts: SceneOptions = {},
): Scene {
  const w = opts.width ?? 700;
  const h = opts.height ?? 700;
  const items: SceneItem[] = [];

  if (costfield) {
    let min = Infinity;
    let max = -Infinity;
    for (const v of costfield.values) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
    items.push({ kind: "heatmap", res: costfield.res, values: costfield.values, min, max });
  }

  for (const o of state.scenario.obstacles) {
    const [cx, cy] = toCanvas(o.center, w, h);
    items.push({ kind: "circle", x: cx, y: cy, r: o.radius * w, color: "#ffffff", dashed: false });
    items.push({ kind: "circle", x: cx, y: cy, r: 2 * o.radius * w, color: "#ffffff88", dashed: true });
    items.push({ kind: "label", x: cx, y: cy - o.radius * w - 4, text: o.nickname });
  }

  items.push({
    kind: "polyline",
    points: state.path_samples.map((p) => toCanvas(p, w, h)),
    color: "#e84040",
    width: 2,
  });

  const fixed = new Set(state.fixed_indices);
  state.scenario.ctrl_points.forEach((p, i) => {
    const [x, y] = toCanvas(p, w, h);
    items.push({
      kind: "handle",
      x,
      y,
      index: i,
      fixed: fixed.has(i),
      shaking: opts.shakePoint === i,
    });
  });

  return { width: w, height: h, items };
}

/** Largest update iteration <= index (update lines are sampled). */
export function nearestUpdateIter(trace: TraceRecord[], index: number): number | null {
  let best: number | null = null;
  for (const rec of trace) {
    if (rec.kind === "update" && rec.iter <= index && (best === null || rec.iter > best)) {
      best = rec.iter;
    }
  }
  return best;
}

/** Update sentences, verbatim, for the update block governing `index`. */
export function updateAnnotations(trace: TraceRecord[], index: number): string[] {
  const iter = nearestUpdateIter(trace, index);
  if (iter === null) return [];
  return trace.filter((r) => r.kind === "update" && r.iter === iter).map((r) => r.text);
}

export function buildPlaybackScene(
  theta: [number, number][],
  trace: TraceRecord[],
  index: number,
  opts: SceneOptions & { curveSamples?: [number, number][]; obstacles?: StateResponse } = {},
): Scene {
  const w = opts.width ?? 700;
  const h = opts.height ?? 700;
  const items: SceneItem[] = [];

  if (opts.obstacles) {
    for (const o of opts.obstacles.scenario.obstacles) {
      const [cx, cy] = toCanvas(o.center, w, h);
      items.push({ kind: "circle", x: cx, y: cy, r: o.radius * w, color: "#888888", dashed: false });
    }
  }

  const pathPoints = opts.curveSamples ?? theta;
  items.push({
    kind: "polyline",
    points: pathPoints.map((p) => toCanvas(p, w, h)),
    color: "#40c0e8",
    width: 2,
  });

  theta.forEach((p, i) => {
    const [x, y] = toCanvas(p, w, h);
    items.push({ kind: "handle", x, y, index: i, fixed: i === 0 || i === theta.length - 1, shaking: false });
  });

  for (const rec of trace) {
    if (rec.kind === "event" && rec.iter === index && rec.payload.start_grid) {
      const [gx, gy] = rec.payload.start_grid as [number, number];
      const [x, y] = toCanvas(gridToWorld([gx, gy]), w, h);
      items.push({ kind: "marker", x, y, text: rec.text });
    }
  }

  return { width: w, height: h, items };
}

/** Five evenly spaced iteration indices across a history of length n. */
export function keyframes(n: number): number[] {
  if (n <= 1) return [0];
  const last = n - 1;
  return [0, 1, 2, 3, 4].map((i) => Math.floor((i * last) / 4));
}

/** Snapshot-friendly view: raster values reduced to summary statistics. */
export function summarize(scene: Scene): unknown {
  const round = (v: number) => Math.round(v * 100) / 100;
  return {
    width: scene.width,
    height: scene.height,
    items: scene.items.map((item) => {
      if (item.kind === "heatmap") {
        const sum = item.values.reduce((a, b) => a + b, 0);
        return {
          kind: item.kind,
          res: item.res,
          cells: item.values.length,
          min: round(item.min),
          max: round(item.max),
          mean: round(sum / item.values.length),
        };
      }
      if (item.kind === "polyline") {
        return {
          kind: item.kind,
          color: item.color,
          n: item.points.length,
          first: item.points[0].map(round),
          last: item.points[item.points.length - 1].map(round),
        };
      }
      if (item.kind === "marker") {
        return { kind: item.kind, x: round(item.x), y: round(item.y), text: item.text };
      }
      if (item.kind === "label") {
        return { kind: item.kind, x: round(item.x), y: round(item.y), text: item.text };
      }
      if (item.kind === "circle") {
        return { ...item, x: round(item.x), y: round(item.y), r: round(item.r) };
      }
      return { ...item, x: round(item.x), y: round(item.y) };
    }),
  };
}
