import { describe, expect, it } from "vitest";
import { MAX_PREVIEW_VERTICES, buildPreviewTriangles, decimateGrid } from "../src/preview.js";

function rampSamples(width: number, height: number): Uint16Array {
  const out = new Uint16Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      out[y * width + x] = 100 + x * 3 + y * 5;
    }
  }
  return out;
}

describe("decimateGrid", () => {
  it("caps both dimensions at the vertex budget", () => {
    const grid = decimateGrid(rampSamples(300, 300), 300, 300);
    expect(grid.width).toBeLessThanOrEqual(MAX_PREVIEW_VERTICES);
    expect(grid.height).toBeLessThanOrEqual(MAX_PREVIEW_VERTICES);
    expect(grid.values).toHaveLength(grid.width * grid.height);
    expect(grid.values[0]).toBe(100); // corner sample survives
  });

  it("keeps small grids intact", () => {
    const grid = decimateGrid(rampSamples(32, 32), 32, 32);
    expect(grid.width).toBe(32);
    expect(grid.height).toBe(32);
    expect(Array.from(grid.values)).toEqual(Array.from(rampSamples(32, 32)));
  });

  it("picks every k-th sample on both axes", () => {
    const samples = rampSamples(9, 9);
    const grid = decimateGrid(samples, 9, 9, 3);
    expect(grid.width).toBe(3);
    expect(grid.height).toBe(3);
    expect(grid.values[1]).toBe(samples[3]); // x = 3, y = 0
    expect(grid.values[3]).toBe(samples[27]); // x = 0, y = 3
  });

  it("rejects mismatched sample counts", () => {
    expect(() => decimateGrid(new Uint16Array(5), 4, 4)).toThrow(/does not match/);
  });
});

describe("buildPreviewTriangles", () => {
  it("emits two triangles per cell, depth-sorted for painting", () => {
    const grid = decimateGrid(rampSamples(16, 16), 16, 16);
    const triangles = buildPreviewTriangles(grid, 360, 260);
    expect(triangles).toHaveLength(2 * 15 * 15);
    for (let i = 1; i < triangles.length; i++) {
      expect(triangles[i].depth).toBeGreaterThanOrEqual(triangles[i - 1].depth);
    }
  });

  it("keeps every projected vertex inside the canvas", () => {
    const grid = decimateGrid(rampSamples(16, 16), 16, 16);
    for (const tri of buildPreviewTriangles(grid, 360, 260)) {
      for (let k = 0; k < 3; k++) {
        expect(tri.xs[k]).toBeGreaterThanOrEqual(0);
        expect(tri.xs[k]).toBeLessThanOrEqual(360);
        expect(tri.ys[k]).toBeGreaterThanOrEqual(0);
        expect(tri.ys[k]).toBeLessThanOrEqual(260);
      }
    }
  });

  it("produces byte-range colors and is deterministic", () => {
    const grid = decimateGrid(rampSamples(12, 12), 12, 12);
    const a = buildPreviewTriangles(grid, 300, 200);
    const b = buildPreviewTriangles(grid, 300, 200);
    expect(a).toEqual(b);
    for (const tri of a) {
      for (const c of tri.color) {
        expect(Number.isInteger(c)).toBe(true);
        expect(c).toBeGreaterThanOrEqual(0);
        expect(c).toBeLessThanOrEqual(255);
      }
    }
  });

  it("shades a flat field uniformly", () => {
    const grid = decimateGrid(new Uint16Array(64).fill(500), 8, 8);
    const triangles = buildPreviewTriangles(grid, 300, 200);
    const first = triangles[0].color;
    for (const tri of triangles) {
      expect(tri.color).toEqual(first);
    }
  });

  it("returns nothing for degenerate grids", () => {
    const grid = decimateGrid(new Uint16Array(3).fill(10), 3, 1);
    expect(buildPreviewTriangles(grid, 300, 200)).toEqual([]);
  });
});
