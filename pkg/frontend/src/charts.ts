// Rolling metric chart model (data only; drawing lives in render.ts).
// Switch events become vertical markers and never perturb the series.

import { FrameMessage } from "./protocol.js";

export const CHART_KEYS = ["network", "unique_cells", "loc_variance"] as const;
export type ChartKey = (typeof CHART_KEYS)[number];

export interface ChartPoint {
  t: number;
  value: number;
}

export class RollingCharts {
  readonly series: Record<ChartKey, ChartPoint[]> = {
    network: [],
    unique_cells: [],
    loc_variance: [],
  };
  readonly markerTimes: number[] = [];
  private lastSampleT = Number.NEGATIVE_INFINITY;

  constructor(private maxPoints = 600) {}

  addFrame(frame: FrameMessage): void {
    if (!frame.metrics) return;
    // Metrics only change on the sampling cadence; store one point per sample.
    if (frame.t <= this.lastSampleT) return;
    this.lastSampleT = frame.t;
    for (const key of CHART_KEYS) {
      const points = this.series[key];
      points.push({ t: frame.t, value: frame.metrics[key] });
      if (points.length > this.maxPoints) points.shift();
    }
  }

  addMarker(t: number): void {
    this.markerTimes.push(t);
  }

  /** Largest step between consecutive points around time t0 (continuity probe). */
  maxJumpNear(key: ChartKey, t0: number, halfWindow: number): number {
    const pts = this.series[key].filter((p) => Math.abs(p.t - t0) <= halfWindow);
    let worst = 0;
    for (let i = 1; i < pts.length; i++) {
      worst = Math.max(worst, Math.abs(pts[i].value - pts[i - 1].value));
    }
    return worst;
  }

  reset(): void {
    for (const key of CHART_KEYS) this.series[key].length = 0;
    this.markerTimes.length = 0;
    this.lastSampleT = Number.NEGATIVE_INFINITY;
  }
}
