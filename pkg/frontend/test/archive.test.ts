// Repertoire browser model against a service-captured archive fixture.

import { describe, expect, it } from "vitest";
import { ArchiveDetail, ArchiveView } from "../src/archive.js";
import { fitnessColor, fitnessRgb, luminance } from "../src/colormap.js";
import fixture from "./fixtures/archive.json";

const detail = fixture.detail as unknown as ArchiveDetail;
const listing = fixture.listing as { name: string; cells: number }[];

describe("archive view", () => {
  it("slice counts along every axis reconcile with the header count", () => {
    const view = new ArchiveView(detail);
    expect(view.size).toBe(listing[0].cells);
    for (const axis of [0, 1, 2] as const) {
      const counts = view.sliceCounts(axis);
      expect(counts.length).toBe(view.dims[axis]);
      expect(counts.reduce((a, b) => a + b, 0)).toBe(view.size);
    }
  });

  it("slices partition the archive", () => {
    const view = new ArchiveView(detail);
    for (const axis of [0, 1, 2] as const) {
      let total = 0;
      for (let s = 0; s < view.dims[axis]; s++) {
        const members = view.slice(axis, s);
        expect(members.every((c) => c.bins[axis] === s)).toBe(true);
        total += members.length;
      }
      expect(total).toBe(view.size);
    }
  });

  it("finds cells by bin coordinates", () => {
    const view = new ArchiveView(detail);
    const cell = detail.cells[0];
    expect(view.cellAt(cell.bins)).toEqual(cell);
    expect(view.cellAt([9, 99, 9])).toBeUndefined();
  });

  it("a one-cell archive renders exactly one filled square per slicing", () => {
    const lone = detail.cells[0];
    const view = new ArchiveView({ ...detail, cells: [lone] });
    for (const axis of [0, 1, 2] as const) {
      const counts = view.sliceCounts(axis);
      expect(counts.reduce((a, b) => a + b, 0)).toBe(1);
      expect(counts[lone.bins[axis]]).toBe(1);
    }
  });

  it("panel axes cover the other two dimensions", () => {
    expect(ArchiveView.panelAxes(0)).toEqual([1, 2]);
    expect(ArchiveView.panelAxes(1)).toEqual([0, 2]);
    expect(ArchiveView.panelAxes(2)).toEqual([0, 1]);
  });
});

describe("fitness colormap", () => {
  it("is monotone: higher fitness is brighter", () => {
    const [lo, hi] = new ArchiveView(detail).fitnessRange();
    let prev = -1;
    for (let i = 0; i <= 50; i++) {
      const v = lo + ((hi - lo) * i) / 50;
      const lum = luminance(fitnessRgb(v, lo, hi));
      expect(lum).toBeGreaterThan(prev);
      prev = lum;
    }
  });

  it("clamps out-of-range values", () => {
    expect(fitnessColor(-1, 0, 1)).toBe(fitnessColor(0, 0, 1));
    expect(fitnessColor(2, 0, 1)).toBe(fitnessColor(1, 0, 1));
  });

  it("degenerate range still yields a valid color", () => {
    expect(fitnessColor(0.5, 0.5, 0.5)).toMatch(/^rgb\(\d+,\d+,\d+\)$/);
  });
});
