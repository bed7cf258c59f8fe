/** Paint a scene display list onto a 2D canvas context. */

import type { Scene, SceneItem } from "./scene.js";

const VIRIDIS: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

function colormap(t: number): [number, number, number] {
  const x = Math.min(Math.max(t, 0), 1) * (VIRIDIS.length - 1);
  const i = Math.min(Math.floor(x), VIRIDIS.length - 2);
  const f = x - i;
  const a = VIRIDIS[i];
  const b = VIRIDIS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

function paintHeatmap(
  ctx: CanvasRenderingContext2D,
  item: Extract<SceneItem, { kind: "heatmap" }>,
  width: number,
  height: number,
): void {
  const { res, values, min, max } = item;
  const span = max - min || 1;
  const image = ctx.createImageData(res, res);
  for (let row = 0; row < res; row++) {
    for (let col = 0; col < res; col++) {
      // raster row 0 is the bottom; canvas row 0 is the top
      const v = values[(res - 1 - row) * res + col];
      const [r, g, b] = colormap((v - min) / span);
      const o = (row * res + col) * 4;
      image.data[o] = r;
      image.data[o + 1] = g;
      image.data[o + 2] = b;
      image.data[o + 3] = 255;
    }
  }
  const off = document.createElement("canvas");
  off.width = res;
  off.height = res;
  off.getContext("2d")!.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, width, height);
}

export function paintScene(ctx: CanvasRenderingContext2D, scene: Scene): void {
  ctx.clearRect(0, 0, scene.width, scene.height);
  for (const item of scene.items) {
    switch (item.kind) {
      case "heatmap":
        paintHeatmap(ctx, item, scene.width, scene.height);
        break;
      case "circle":
        ctx.beginPath();
        ctx.setLineDash(item.dashed ? [4, 4] : []);
        ctx.strokeStyle = item.color;
        ctx.lineWidth = 1;
        ctx.arc(item.x, item.y, item.r, 0, 2 * Math.PI);
        ctx.stroke();
        ctx.setLineDash([]);
        break;
      case "label":
        ctx.fillStyle = "#ffffff";
        ctx.font = "10px sans-serif";
        ctx.textAlign = "center";
        ctx.fillText(item.text, item.x, item.y);
        break;
      case "polyline": {
        ctx.beginPath();
        ctx.strokeStyle = item.color;
        ctx.lineWidth = item.width;
        item.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        break;
      }
      case "handle": {
        const wobble = item.shaking ? 3 : 0;
        ctx.beginPath();
        ctx.fillStyle = item.fixed ? "#999999" : "#ff5050";
        ctx.arc(item.x + wobble, item.y, item.fixed ? 4 : 5, 0, 2 * Math.PI);
        ctx.fill();
        break;
      }
      case "marker":
        ctx.fillStyle = "#ffe040";
        ctx.fillRect(item.x - 2, item.y - 2, 4, 4);
        break;
    }
  }
}

/** Hit test for control-point handles, in canvas pixels. */
export function handleAt(scene: Scene, x: number, y: number, tolerance = 8): number | null {
  for (const item of scene.items) {
    if (item.kind === "handle") {
      const d = Math.hypot(item.x - x, item.y - y);
      if (d <= tolerance) return item.index;
    }
  }
  return null;
}
