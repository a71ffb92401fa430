/** Static-lit 3D preview of a heightfield.
 *
 * The grid is decimated to at most 128x128 vertices, split into triangles,
 * shaded once with a fixed directional light, projected isometrically, and
 * depth-sorted. The caller just fills the returned screen-space triangles in
 * order (painter's algorithm); no WebGL involved.
 */
import { hypsometricColor } from "./colormap.js";

export const MAX_PREVIEW_VERTICES = 128;

export interface HeightGrid {
  values: Float32Array;
  width: number;
  height: number;
}

export function decimateGrid(
  samples: Uint16Array | Uint8Array | Float32Array,
  width: number,
  height: number,
  maxVertices: number = MAX_PREVIEW_VERTICES,
): HeightGrid {
  if (samples.length !== width * height) {
    throw new Error(`sample count ${samples.length} does not match ${width}x${height}`);
  }
  const step = Math.max(1, Math.ceil(Math.max(width, height) / maxVertices));
  const outW = Math.floor((width - 1) / step) + 1;
  const outH = Math.floor((height - 1) / step) + 1;
  const values = new Float32Array(outW * outH);
  for (let y = 0; y < outH; y++) {
    for (let x = 0; x < outW; x++) {
      values[y * outW + x] = samples[y * step * width + x * step];
    }
  }
  return { values, width: outW, height: outH };
}

export interface ShadedTriangle {
  /** Screen-space corner coordinates. */
  xs: [number, number, number];
  ys: [number, number, number];
  /** Painter key; triangles are returned sorted ascending (far to near). */
  depth: number;
  color: [number, number, number];
}

const LIGHT = normalize([-0.45, -0.6, 0.75]);
const AMBIENT = 0.3;

function normalize(v: [number, number, number]): [number, number, number] {
  const n = Math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** Build the shaded, projected, depth-sorted triangle list for one grid. */
export function buildPreviewTriangles(
  grid: HeightGrid,
  canvasWidth: number,
  canvasHeight: number,
): ShadedTriangle[] {
  const { values, width: gw, height: gh } = grid;
  if (gw < 2 || gh < 2) return [];

  let min = values[0];
  let max = values[0];
  for (let i = 1; i < values.length; i++) {
    if (values[i] < min) min = values[i];
    if (values[i] > max) max = values[i];
  }
  const span = max - min;
  const zScale = 0.35 * Math.max(gw, gh);
  const relief = (i: number) => (span > 0 ? ((values[i] - min) / span) * zScale : 0);
  const tint = (i: number) => (span > 0 ? (values[i] - min) / span : 0);

  // isometric axes; z lifts points up the screen
  const project = (gx: number, gy: number, z: number): [number, number] => [
    (gx - gy) * 0.866,
    (gx + gy) * 0.5 - z,
  ];

  // fit: project the ground corners at both height extremes
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const [gx, gy] of [
    [0, 0],
    [gw - 1, 0],
    [0, gh - 1],
    [gw - 1, gh - 1],
  ]) {
    for (const z of [0, zScale]) {
      const [sx, sy] = project(gx, gy, z);
      minX = Math.min(minX, sx);
      maxX = Math.max(maxX, sx);
      minY = Math.min(minY, sy);
      maxY = Math.max(maxY, sy);
    }
  }
  const margin = 0.05;
  const scale = Math.min(
    (canvasWidth * (1 - 2 * margin)) / (maxX - minX),
    (canvasHeight * (1 - 2 * margin)) / (maxY - minY),
  );
  const offX = canvasWidth / 2 - ((minX + maxX) / 2) * scale;
  const offY = canvasHeight / 2 - ((minY + maxY) / 2) * scale;

  const screen = (gx: number, gy: number, z: number): [number, number] => {
    const [sx, sy] = project(gx, gy, z);
    return [sx * scale + offX, sy * scale + offY];
  };

  const triangles: ShadedTriangle[] = [];
  const emit = (corners: Array<[number, number, number]>, tMean: number) => {
    const [p0, p1, p2] = corners;
    const ux = p1[0] - p0[0];
    const uy = p1[1] - p0[1];
    const uz = p1[2] - p0[2];
    const vx = p2[0] - p0[0];
    const vy = p2[1] - p0[1];
    const vz = p2[2] - p0[2];
    let nx = uy * vz - uz * vy;
    let ny = uz * vx - ux * vz;
    let nz = ux * vy - uy * vx;
    if (nz < 0) {
      nx = -nx;
      ny = -ny;
      nz = -nz;
    }
    const len = Math.sqrt(nx * nx + ny * ny + nz * nz) || 1;
    const lambert = Math.max(0, (nx * LIGHT[0] + ny * LIGHT[1] + nz * LIGHT[2]) / len);
    const shade = AMBIENT + (1 - AMBIENT) * lambert;
    const base = hypsometricColor(tMean);
    const xs: number[] = [];
    const ys: number[] = [];
    let depth = 0;
    for (const [gx, gy, z] of corners) {
      const [sx, sy] = screen(gx, gy, z);
      xs.push(sx);
      ys.push(sy);
      depth += (gx + gy) / 3;
    }
    triangles.push({
      xs: xs as [number, number, number],
      ys: ys as [number, number, number],
      depth,
      color: [
        Math.round(base[0] * shade),
        Math.round(base[1] * shade),
        Math.round(base[2] * shade),
      ],
    });
  };

  for (let y = 0; y < gh - 1; y++) {
    for (let x = 0; x < gw - 1; x++) {
      const i00 = y * gw + x;
      const i10 = i00 + 1;
      const i01 = i00 + gw;
      const i11 = i01 + 1;
      const p00: [number, number, number] = [x, y, relief(i00)];
      const p10: [number, number, number] = [x + 1, y, relief(i10)];
      const p01: [number, number, number] = [x, y + 1, relief(i01)];
      const p11: [number, number, number] = [x + 1, y + 1, relief(i11)];
      emit([p00, p10, p11], (tint(i00) + tint(i10) + tint(i11)) / 3);
      emit([p00, p11, p01], (tint(i00) + tint(i11) + tint(i01)) / 3);
    }
  }
  triangles.sort((a, b) => a.depth - b.depth);
  return triangles;
}
