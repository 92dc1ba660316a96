/**
 * View state and pure helpers: pixel-to-patch lookup and the keyboard
 * class mapping.  Everything here is DOM-free.
 */

import type { ClassDef, FramePatches, PatchEntry } from './api.js';

export interface ViewState {
  currentFrame: number | null;
  selectedClass: number;
  hoveredPatch: string | null; // MTS hex of the patch under the cursor
  overlayOpacity: number;
  coverageGauge: number; // mirrors the service's last reported coveredFraction
  done: boolean;
}

export function initialViewState(): ViewState {
  return {
    currentFrame: null,
    selectedClass: 1,
    hoveredPatch: null,
    overlayOpacity: 0.55,
    coverageGauge: 0,
    done: false,
  };
}

/** Classes the annotator can assign: the served palette order minus the
 * reserved unlabeled entry. */
export function labelableClasses(classes: ClassDef[]): ClassDef[] {
  return classes.filter((c) => c.id !== 0);
}

/** Digits 1..9 then 0 select the first ten labelable classes in palette
 * order; returns null for digits past the palette. */
export function classForDigit(classes: ClassDef[], digit: number): ClassDef | null {
  const ordered = labelableClasses(classes);
  const index = digit === 0 ? 9 : digit - 1;
  return ordered[index] ?? null;
}

/** Row-major pixel index -> patch, built from the served run data. */
export class PatchLookup {
  private readonly table: Int32Array;
  readonly width: number;
  readonly height: number;
  readonly patches: PatchEntry[];

  constructor(frame: FramePatches) {
    this.width = frame.width;
    this.height = frame.height;
    this.patches = frame.patches;
    this.table = new Int32Array(frame.width * frame.height).fill(-1);
    frame.patches.forEach((patch, index) => {
      for (const [start, length] of patch.runs) {
        this.table.fill(index, start, start + length);
      }
    });
  }

  at(x: number, y: number): PatchEntry | null {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return null;
    const index = this.table[y * this.width + x];
    return index >= 0 ? this.patches[index] : null;
  }

  byMts(mts: string): PatchEntry | null {
    return this.patches.find((p) => p.mts === mts) ?? null;
  }
}

/** Area-weighted covered fraction of a frame from its patch entries. */
export function frameCoverage(patches: PatchEntry[]): number {
  let total = 0;
  let labeled = 0;
  for (const patch of patches) {
    total += patch.area;
    if (patch.classId !== 0) labeled += patch.area;
  }
  return total === 0 ? 1 : labeled / total;
}
