/** Keeps the last N (sketch, result) pairs for the history panel. */
import { cloneDocument, type StrokeDocument } from "./stroke.js";
import type { JobStatus } from "./client.js";

export interface HistoryEntry {
  /** Snapshot of the document that produced the sketch. */
  doc: StrokeDocument;
  /** Exact PNG bytes that were submitted. */
  sketchPng: Uint8Array;
  /** Final job status (state "done"). */
  result: JobStatus;
}

export class HistoryStore {
  private items: HistoryEntry[] = [];

  constructor(readonly limit: number) {
    if (!Number.isInteger(limit) || limit < 1) {
      throw new Error(`history limit must be a positive integer, got ${limit}`);
    }
  }

  /** Newest first; oldest entries fall off past the limit. */
  push(entry: HistoryEntry): void {
    this.items.unshift({
      doc: cloneDocument(entry.doc),
      sketchPng: entry.sketchPng,
      result: entry.result,
    });
    if (this.items.length > this.limit) {
      this.items.length = this.limit;
    }
  }

  get entries(): readonly HistoryEntry[] {
    return this.items;
  }

  at(index: number): HistoryEntry | undefined {
    return this.items[index];
  }
}
