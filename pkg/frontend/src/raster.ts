/** Deterministic stroke rasterizer.
 *
 * No anti-aliasing: every pixel is either black or a single fully saturated
 * channel, so the same document always produces the same bytes and the
 * service sees exactly the legend colors it was trained on. Strokes are
 * stamped as discs walked along each segment; later strokes overwrite
 * earlier ones rather than blending.
 */
import type { StrokeColor, Stroke, StrokeDocument } from "./stroke.js";

export interface RasterImage {
  width: number;
  height: number;
  /** RGBA, row-major, alpha always 255. */
  rgba: Uint8ClampedArray;
}

const CHANNEL: Record<StrokeColor, number> = { red: 0, green: 1, blue: 2 };

export function rasterize(doc: StrokeDocument): RasterImage {
  const rgba = new Uint8ClampedArray(doc.width * doc.height * 4);
  for (let i = 3; i < rgba.length; i += 4) {
    rgba[i] = 255;
  }
  for (const stroke of doc.strokes) {
    stampStroke(rgba, doc.width, doc.height, stroke);
  }
  return { width: doc.width, height: doc.height, rgba };
}

function stampStroke(rgba: Uint8ClampedArray, w: number, h: number, stroke: Stroke): void {
  const pts = stroke.points;
  if (pts.length === 0) return;
  const channel = CHANNEL[stroke.color];
  const radius = Math.max(0.5, stroke.width / 2);
  stampDisc(rgba, w, h, pts[0].x, pts[0].y, radius, channel);
  for (let i = 1; i < pts.length; i++) {
    const a = pts[i - 1];
    const b = pts[i];
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    // quarter-pixel steps keep thick segments gap-free at any angle
    const steps = Math.max(1, Math.ceil(Math.sqrt(dx * dx + dy * dy) * 4));
    for (let s = 1; s <= steps; s++) {
      stampDisc(rgba, w, h, a.x + (dx * s) / steps, a.y + (dy * s) / steps, radius, channel);
    }
  }
}

function stampDisc(
  rgba: Uint8ClampedArray,
  w: number,
  h: number,
  cx: number,
  cy: number,
  radius: number,
  channel: number,
): void {
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(w - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(h - 1, Math.ceil(cy + radius));
  const r2 = radius * radius;
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) {
        const base = (y * w + x) * 4;
        rgba[base] = 0;
        rgba[base + 1] = 0;
        rgba[base + 2] = 0;
        rgba[base + channel] = 255;
      }
    }
  }
}
