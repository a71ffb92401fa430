/** Heightmap display: grayscale or hypsometric tint, plus elevation labels.
 * Heightmap PNGs store integer meters in 16-bit samples, so stats come
 * straight from the decoded values. */

export interface HeightStats {
  minM: number;
  maxM: number;
}

export function heightStats(samples: Uint16Array | Uint8Array): HeightStats {
  if (samples.length === 0) return { minM: 0, maxM: 0 };
  let min = samples[0];
  let max = samples[0];
  for (let i = 1; i < samples.length; i++) {
    if (samples[i] < min) min = samples[i];
    if (samples[i] > max) max = samples[i];
  }
  return { minM: min, maxM: max };
}

export function formatElevation(stats: HeightStats): string {
  return `${stats.minM} m to ${stats.maxM} m`;
}

function normalized(samples: Uint16Array | Uint8Array, stats: HeightStats): Float32Array {
  const out = new Float32Array(samples.length);
  const span = stats.maxM - stats.minM;
  if (span <= 0) return out;
  for (let i = 0; i < samples.length; i++) {
    out[i] = (samples[i] - stats.minM) / span;
  }
  return out;
}

export function grayscaleRgba(samples: Uint16Array | Uint8Array): Uint8ClampedArray {
  const stats = heightStats(samples);
  const t = normalized(samples, stats);
  const rgba = new Uint8ClampedArray(samples.length * 4);
  for (let i = 0; i < samples.length; i++) {
    const v = Math.round(t[i] * 255);
    rgba[i * 4] = v;
    rgba[i * 4 + 1] = v;
    rgba[i * 4 + 2] = v;
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

/** Classic elevation ramp: lowland green through tan and brown to pale peaks. */
const HYPSO_STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [46, 110, 66]],
  [0.35, [170, 185, 90]],
  [0.6, [150, 110, 70]],
  [0.85, [200, 190, 180]],
  [1.0, [245, 248, 250]],
];

export function hypsometricColor(t: number): [number, number, number] {
  const x = Math.max(0, Math.min(1, t));
  for (let i = 1; i < HYPSO_STOPS.length; i++) {
    const [t1, c1] = HYPSO_STOPS[i];
    if (x <= t1) {
      const [t0, c0] = HYPSO_STOPS[i - 1];
      const u = t1 === t0 ? 0 : (x - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + (c1[0] - c0[0]) * u),
        Math.round(c0[1] + (c1[1] - c0[1]) * u),
        Math.round(c0[2] + (c1[2] - c0[2]) * u),
      ];
    }
  }
  return HYPSO_STOPS[HYPSO_STOPS.length - 1][1];
}

export function hypsometricRgba(samples: Uint16Array | Uint8Array): Uint8ClampedArray {
  const stats = heightStats(samples);
  const t = normalized(samples, stats);
  const rgba = new Uint8ClampedArray(samples.length * 4);
  for (let i = 0; i < samples.length; i++) {
    const [r, g, b] = hypsometricColor(t[i]);
    rgba[i * 4] = r;
    rgba[i * 4 + 1] = g;
    rgba[i * 4 + 2] = b;
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

/** Decoded RGB texture samples to RGBA pixels. */
export function textureRgba(samples: Uint8Array | Uint16Array, channels: number): Uint8ClampedArray {
  const pixels = samples.length / channels;
  const rgba = new Uint8ClampedArray(pixels * 4);
  const scale = samples instanceof Uint16Array ? 1 / 257 : 1;
  for (let i = 0; i < pixels; i++) {
    const r = samples[i * channels];
    const g = channels >= 3 ? samples[i * channels + 1] : r;
    const b = channels >= 3 ? samples[i * channels + 2] : r;
    rgba[i * 4] = Math.round(r * scale);
    rgba[i * 4 + 1] = Math.round(g * scale);
    rgba[i * 4 + 2] = Math.round(b * scale);
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}
