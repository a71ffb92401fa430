/** Stroke document model and editing history.
 *
 * A document is an ordered list of strokes; each stroke is one of the three
 * legend colors (red = valley, green = ridgeline, blue = cliff), a brush
 * width in pixels, and a polyline of canvas coordinates. The eraser deletes
 * whole strokes rather than painting over them, which keeps every document
 * inside the pure-channel legend by construction.
 */

export type StrokeColor = "red" | "green" | "blue";

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  color: StrokeColor;
  /** Brush diameter in pixels. */
  width: number;
  points: Point[];
}

export interface StrokeDocument {
  width: number;
  height: number;
  strokes: Stroke[];
}

export function emptyDocument(size: number): StrokeDocument {
  if (!Number.isInteger(size) || size < 1) {
    throw new Error(`canvas size must be a positive integer, got ${size}`);
  }
  return { width: size, height: size, strokes: [] };
}

export function cloneDocument(doc: StrokeDocument): StrokeDocument {
  return {
    width: doc.width,
    height: doc.height,
    strokes: doc.strokes.map((s) => ({
      color: s.color,
      width: s.width,
      points: s.points.map((p) => ({ x: p.x, y: p.y })),
    })),
  };
}

function pointSegmentDistance(p: Point, a: Point, b: Point): number {
  const abx = b.x - a.x;
  const aby = b.y - a.y;
  const lengthSq = abx * abx + aby * aby;
  let t = 0;
  if (lengthSq > 0) {
    t = Math.max(0, Math.min(1, ((p.x - a.x) * abx + (p.y - a.y) * aby) / lengthSq));
  }
  const dx = p.x - (a.x + t * abx);
  const dy = p.y - (a.y + t * aby);
  return Math.sqrt(dx * dx + dy * dy);
}

/** Minimum distance from a point to a stroke's polyline. */
export function strokeDistance(stroke: Stroke, p: Point): number {
  const pts = stroke.points;
  if (pts.length === 0) return Infinity;
  if (pts.length === 1) {
    const dx = p.x - pts[0].x;
    const dy = p.y - pts[0].y;
    return Math.sqrt(dx * dx + dy * dy);
  }
  let best = Infinity;
  for (let i = 1; i < pts.length; i++) {
    best = Math.min(best, pointSegmentDistance(p, pts[i - 1], pts[i]));
  }
  return best;
}

/** Document editor with whole-snapshot undo/redo. */
export class SketchEditor {
  private current: StrokeDocument;
  private undoStack: StrokeDocument[] = [];
  private redoStack: StrokeDocument[] = [];

  constructor(size: number) {
    this.current = emptyDocument(size);
  }

  get document(): StrokeDocument {
    return this.current;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  get canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  private snapshot(): void {
    this.undoStack.push(cloneDocument(this.current));
    this.redoStack.length = 0;
  }

  addStroke(stroke: Stroke): void {
    if (stroke.points.length === 0) return;
    this.snapshot();
    this.current.strokes.push({
      color: stroke.color,
      width: stroke.width,
      points: stroke.points.map((p) => ({ x: p.x, y: p.y })),
    });
  }

  /** Delete every stroke whose ink lies within `radius` of `p`.
   * Returns true when anything was removed; misses leave the history alone. */
  eraseAt(p: Point, radius: number): boolean {
    const survivors = this.current.strokes.filter(
      (s) => strokeDistance(s, p) > radius + s.width / 2,
    );
    if (survivors.length === this.current.strokes.length) return false;
    this.snapshot();
    this.current.strokes = survivors;
    return true;
  }

  clear(): void {
    if (this.current.strokes.length === 0) return;
    this.snapshot();
    this.current.strokes = [];
  }

  /** Replace the document (history panel "load sketch"). Undoable. */
  load(doc: StrokeDocument): void {
    this.snapshot();
    this.current = cloneDocument(doc);
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) return false;
    this.redoStack.push(this.current);
    this.current = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (next === undefined) return false;
    this.undoStack.push(this.current);
    this.current = next;
    return true;
  }
}
