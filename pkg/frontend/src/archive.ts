// Repertoire browsing model: slicing the 3-D behavior space along each axis
// so a flat screen can show it, as the evolution figures do.

export interface CellSummary {
  bins: number[];
  fitness: number;
  raw: number[];
  evals: number;
}

export interface ArchiveDetail {
  name: string;
  dims: number[];
  cells: CellSummary[];
  master_seed?: number | null;
  source_seeds?: number[];
}

export const AXIS_NAMES = ["exploration", "network", "localization"] as const;

export class ArchiveView {
  readonly dims: [number, number, number];
  private index = new Map<string, CellSummary>();

  constructor(readonly detail: ArchiveDetail) {
    this.dims = [detail.dims[0], detail.dims[1], detail.dims[2]];
    for (const cell of detail.cells) {
      this.index.set(cell.bins.join(","), cell);
    }
  }

  get size(): number {
    return this.detail.cells.length;
  }

  cellAt(bins: number[]): CellSummary | undefined {
    return this.index.get(bins.join(","));
  }

  /** Cells whose bin index along `axis` equals `slice`. */
  slice(axis: 0 | 1 | 2, slice: number): CellSummary[] {
    return this.detail.cells.filter((c) => c.bins[axis] === slice);
  }

  /** Number of cells per slice along `axis`; sums to the archive size. */
  sliceCounts(axis: 0 | 1 | 2): number[] {
    const counts = new Array<number>(this.dims[axis]).fill(0);
    for (const cell of this.detail.cells) counts[cell.bins[axis]] += 1;
    return counts;
  }

  fitnessRange(): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const cell of this.detail.cells) {
      lo = Math.min(lo, cell.fitness);
      hi = Math.max(hi, cell.fitness);
    }
    return this.size ? [lo, hi] : [0, 1];
  }

  /** The two axes a slice panel displays, given the sliced axis. */
  static panelAxes(axis: 0 | 1 | 2): [number, number] {
    return axis === 0 ? [1, 2] : axis === 1 ? [0, 2] : [0, 1];
  }
}
