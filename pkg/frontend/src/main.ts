/** Browser bootstrap: wires the store, canvas, playback, and chat panel. */

import { Api } from "./api.js";
import { handleAt, paintScene } from "./canvas.js";
import {
  buildPlaybackScene,
  buildWorldScene,
  canvasToWorld,
  keyframes,
  updateAnnotations,
  worldToGrid,
  type Scene,
} from "./scene.js";
import { Store } from "./state.js";

const POLL_MS = 500;
const SIZE = 700;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("world");
  canvas.width = SIZE;
  canvas.height = SIZE;
  const ctx = canvas.getContext("2d")!;
  const statusLine = el<HTMLDivElement>("status");
  const banner = el<HTMLDivElement>("banner");
  const annotations = el<HTMLPreElement>("annotations");
  const scrubber = el<HTMLInputElement>("scrubber");
  const transcript = el<HTMLDivElement>("transcript");

  let scene: Scene | null = null;
  let mode: "world" | "playback" = "world";
  let dragging: number | null = null;
  let curveCache = new Map<number, [number, number][]>();

  const api = new Api("");
  const store = new Store(api, render);

  function render(): void {
    const v = store.view;
    banner.textContent = v.staleSession
      ? "session expired; reload to re-create"
      : v.banner ?? (v.chatRetryAvailable ? "chat failed; press send to retry" : "");

    if (mode === "playback" && v.selectedRun?.theta_history && v.trace) {
      const theta = v.selectedRun.theta_history[v.playbackIndex];
      scene = buildPlaybackScene(theta, v.trace, v.playbackIndex, {
        width: SIZE,
        height: SIZE,
        curveSamples: curveCache.get(v.playbackIndex),
        obstacles: v.state ?? undefined,
      });
      annotations.textContent = updateAnnotations(v.trace, v.playbackIndex).join("\n");
      scrubber.max = String((v.selectedRun.theta_history.length ?? 1) - 1);
      scrubber.value = String(v.playbackIndex);
    } else if (v.state) {
      scene = buildWorldScene(v.state, v.costfield, {
        width: SIZE,
        height: SIZE,
        shakePoint: v.shakePoint,
      });
    }
    if (scene) paintScene(ctx, scene);

    const run = v.selectedRun;
    statusLine.textContent = run
      ? `run ${run.run_id}: ${run.status} (${Math.round(run.progress * 100)}%)`
      : "no run";

    transcript.innerHTML = "";
    for (const msg of v.chat) {
      const div = document.createElement("div");
      div.className = `msg ${msg.role}`;
      div.textContent = `${msg.role}: ${msg.text}`;
      transcript.appendChild(div);
      for (const t of msg.toolEvents) {
        const tool = document.createElement("div");
        tool.className = "tool";
        tool.textContent = `[tool] ${t.tool}(${JSON.stringify(t.args)})`;
        transcript.appendChild(tool);
      }
    }
  }

  canvas.addEventListener("pointerdown", (e) => {
    if (mode !== "world" || !scene) return;
    const rect = canvas.getBoundingClientRect();
    dragging = handleAt(scene, e.clientX - rect.left, e.clientY - rect.top);
    if (dragging !== null && !store.canDrag(dragging)) {
      store.view.shakePoint = dragging;
      render();
      setTimeout(() => store.clearShake(), 300);
      dragging = null;
    }
  });

  canvas.addEventListener("pointerup", async (e) => {
    if (dragging === null || mode !== "world") return;
    const rect = canvas.getBoundingClientRect();
    const world = canvasToWorld(e.clientX - rect.left, e.clientY - rect.top, SIZE, SIZE);
    const index = dragging;
    dragging = null;
    await store.endDrag(index, worldToGrid(world));
  });

  el<HTMLButtonElement>("optimize").addEventListener("click", async () => {
    if (store.optimizeBusy) return;
    mode = "world";
    const steps = Number(el<HTMLInputElement>("steps").value) || 250;
    const optimizer = el<HTMLSelectElement>("optimizer").value;
    await store.startOptimize({ steps, optimizer, lr0: 5e-3, schedule: "cosine" });
    const timer = setInterval(async () => {
      const finished = await store.pollRunOnce();
      if (finished) {
        clearInterval(timer);
        if (store.view.selectedRun?.status === "done") {
          mode = "playback";
          curveCache = new Map();
          await prefetchKeyframeCurves();
          render();
        }
      }
    }, POLL_MS);
  });

  async function prefetchKeyframeCurves(): Promise<void> {
    const v = store.view;
    if (!v.sessionId || !v.activeRunId || !v.selectedRun?.theta_history) return;
    for (const k of keyframes(v.selectedRun.theta_history.length)) {
      const curve = await api.getCurve(v.sessionId, v.activeRunId, k);
      curveCache.set(curve.iter, curve.samples);
    }
  }

  scrubber.addEventListener("input", () => {
    store.setPlaybackIndex(Number(scrubber.value));
  });

  el<HTMLButtonElement>("keyframesBtn").addEventListener("click", () => {
    const n = store.view.selectedRun?.theta_history?.length ?? 0;
    if (!n) return;
    const frames = keyframes(n);
    const current = frames.indexOf(store.view.playbackIndex);
    store.setPlaybackIndex(frames[(current + 1) % frames.length]);
  });

  el<HTMLButtonElement>("worldBtn").addEventListener("click", () => {
    mode = "world";
    render();
  });

  el<HTMLButtonElement>("send").addEventListener("click", async () => {
    const input = el<HTMLInputElement>("message");
    const text = input.value.trim();
    if (!text) return;
    await store.sendChat(text);
    if (!store.view.chatRetryAvailable) input.value = "";
  });

  await store.init({ seed: 7, n_obstacles: 20, n_ctrl: 16 });
}

if (typeof document !== "undefined") {
  boot().catch((e) => {
    console.error(e);
    const banner = document.getElementById("banner");
    if (banner) banner.textContent = `failed to start: ${e}`;
  });
}
