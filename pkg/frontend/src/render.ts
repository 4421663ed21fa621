// Canvas drawing for the live world view and the rolling charts.

import { CHART_KEYS, ChartKey, RollingCharts } from "./charts.js";
import { SessionClient } from "./session.js";

const AGENT_COLOR = "#e8483e";
const LINK_COLOR = "rgba(30,30,30,0.55)";
const PREDICTION_COLOR = "rgba(120,120,120,0.8)";
const EMITTER_COLOR = "#1f77b4";

export function drawWorld(ctx: CanvasRenderingContext2D, s: SessionClient): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (!s.arena[0] || !s.arena[1]) return;
  const sx = w / s.arena[0];
  const sy = h / s.arena[1];
  // y flipped so north is up
  const X = (x: number) => x * sx;
  const Y = (y: number) => h - y * sy;

  // visitation heat: deeper blue = more visited
  let peak = 1;
  for (const row of s.grid) for (const v of row) peak = Math.max(peak, v);
  const cw = s.cellSize * sx;
  const ch = s.cellSize * sy;
  for (let ix = 0; ix < s.grid.length; ix++) {
    for (let iy = 0; iy < s.grid[ix].length; iy++) {
      const v = s.grid[ix][iy];
      if (v <= 0) continue;
      const a = 0.08 + 0.6 * Math.sqrt(v / peak);
      ctx.fillStyle = `rgba(40,80,200,${a.toFixed(3)})`;
      ctx.fillRect(X(ix * s.cellSize), Y((iy + 1) * s.cellSize), cw, ch);
    }
  }

  ctx.strokeStyle = LINK_COLOR;
  ctx.lineWidth = 1;
  for (const [i, j] of s.links) {
    ctx.beginPath();
    ctx.moveTo(X(s.agents[i][0]), Y(s.agents[i][1]));
    ctx.lineTo(X(s.agents[j][0]), Y(s.agents[j][1]));
    ctx.stroke();
  }

  ctx.fillStyle = PREDICTION_COLOR;
  for (const [px, py] of s.predictions) {
    ctx.beginPath();
    ctx.arc(X(px), Y(py), 2, 0, Math.PI * 2);
    ctx.fill();
  }

  if (s.emitter) {
    ctx.strokeStyle = EMITTER_COLOR;
    ctx.lineWidth = 2;
    const [ex, ey] = s.emitter;
    ctx.beginPath();
    ctx.arc(X(ex), Y(ey), 6, 0, Math.PI * 2);
    ctx.stroke();
  }

  ctx.fillStyle = AGENT_COLOR;
  for (const [ax, ay] of s.agents) {
    ctx.beginPath();
    ctx.arc(X(ax), Y(ay), 4, 0, Math.PI * 2);
    ctx.fill();
  }
}

const CHART_LABELS: Record<ChartKey, string> = {
  network: "network coverage",
  unique_cells: "unique cells / window",
  loc_variance: "localization variance",
};

export function drawCharts(ctx: CanvasRenderingContext2D, charts: RollingCharts): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  const laneH = h / CHART_KEYS.length;
  CHART_KEYS.forEach((key, lane) => {
    const pts = charts.series[key];
    const top = lane * laneH;
    ctx.strokeStyle = "#999";
    ctx.strokeRect(0.5, top + 0.5, w - 1, laneH - 1);
    ctx.fillStyle = "#444";
    ctx.font = "11px sans-serif";
    ctx.fillText(CHART_LABELS[key], 6, top + 13);
    if (pts.length < 2) return;
    const t0 = pts[0].t;
    const t1 = pts[pts.length - 1].t;
    let lo = Infinity;
    let hi = -Infinity;
    for (const p of pts) {
      lo = Math.min(lo, p.value);
      hi = Math.max(hi, p.value);
    }
    if (hi <= lo) hi = lo + 1;
    const X = (t: number) => ((t - t0) / Math.max(t1 - t0, 1e-9)) * (w - 10) + 5;
    const Y = (v: number) => top + laneH - 6 - ((v - lo) / (hi - lo)) * (laneH - 24);
    ctx.strokeStyle = "#2b6cb0";
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    pts.forEach((p, i) => (i ? ctx.lineTo(X(p.t), Y(p.value)) : ctx.moveTo(X(p.t), Y(p.value))));
    ctx.stroke();
    ctx.strokeStyle = "rgba(200,60,60,0.8)";
    for (const mt of charts.markerTimes) {
      if (mt < t0 || mt > t1) continue;
      ctx.beginPath();
      ctx.moveTo(X(mt), top + 4);
      ctx.lineTo(X(mt), top + laneH - 4);
      ctx.stroke();
    }
    ctx.fillText(hi.toPrecision(3), w - 60, top + 13);
  });
}
