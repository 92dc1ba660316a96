/**
 * Overlay compositing over raw RGBA buffers.
 *
 * Pure functions over Uint8ClampedArray so the same code runs under the
 * browser canvas and in headless tests.  Labeled patches are tinted by
 * their class color at the given opacity; the hovered patch gets a
 * brightness lift plus a 1px boundary, covering every run of its MTS
 * group (disconnected regions highlight together).
 */

import type { ClassDef, PatchEntry } from './api.js';

const HOVER_LIFT = 48;

export function paletteMap(classes: ClassDef[]): Map<number, [number, number, number]> {
  return new Map(classes.map((c) => [c.id, c.color]));
}

export function compositeOverlay(
  base: Uint8ClampedArray,
  width: number,
  height: number,
  patches: PatchEntry[],
  palette: Map<number, [number, number, number]>,
  opacity: number,
  hoveredMts: string | null,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(base);
  for (const patch of patches) {
    if (patch.classId === 0) continue;
    const color = palette.get(patch.classId);
    if (!color) continue;
    for (const [start, length] of patch.runs) {
      for (let i = start; i < start + length; i++) {
        const o = i * 4;
        out[o] = Math.round(base[o] * (1 - opacity) + color[0] * opacity);
        out[o + 1] = Math.round(base[o + 1] * (1 - opacity) + color[1] * opacity);
        out[o + 2] = Math.round(base[o + 2] * (1 - opacity) + color[2] * opacity);
      }
    }
  }
  if (hoveredMts !== null) {
    const hovered = patches.find((p) => p.mts === hoveredMts);
    if (hovered) applyHover(out, width, height, hovered);
  }
  return out;
}

function applyHover(
  out: Uint8ClampedArray,
  width: number,
  height: number,
  patch: PatchEntry,
): void {
  const member = new Uint8Array(width * height);
  for (const [start, length] of patch.runs) {
    member.fill(1, start, start + length);
  }
  for (const [start, length] of patch.runs) {
    for (let i = start; i < start + length; i++) {
      const x = i % width;
      const y = (i - x) / width;
      const boundary =
        x === 0 || x === width - 1 || y === 0 || y === height - 1 ||
        !member[i - 1] || !member[i + 1] || !member[i - width] || !member[i + width];
      const o = i * 4;
      if (boundary) {
        out[o] = 255;
        out[o + 1] = 255;
        out[o + 2] = 255;
      } else {
        out[o] = Math.min(255, out[o] + HOVER_LIFT);
        out[o + 1] = Math.min(255, out[o + 1] + HOVER_LIFT);
        out[o + 2] = Math.min(255, out[o + 2] + HOVER_LIFT);
      }
    }
  }
}
