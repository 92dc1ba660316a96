import { describe, expect, it } from 'vitest';

import type { ClassDef, FramePatches, PatchEntry } from '../src/api.js';
import { PatchLookup, classForDigit, frameCoverage, labelableClasses } from '../src/state.js';

const CLASSES: ClassDef[] = [
  { id: 0, name: 'Unlabeled', color: [0, 0, 0] },
  { id: 1, name: 'Building', color: [70, 70, 70] },
  { id: 2, name: 'Tree', color: [107, 142, 35] },
  { id: 3, name: 'Sky', color: [70, 130, 180] },
  { id: 4, name: 'Car', color: [0, 0, 142] },
  { id: 5, name: 'Sign', color: [220, 220, 0] },
  { id: 6, name: 'Road', color: [128, 64, 128] },
  { id: 7, name: 'Pedestrian', color: [220, 20, 60] },
  { id: 8, name: 'Fence', color: [190, 153, 153] },
  { id: 9, name: 'Pole', color: [153, 153, 153] },
  { id: 10, name: 'Sidewalk', color: [244, 35, 232] },
  { id: 11, name: 'Bicyclist', color: [119, 11, 32] },
];

function patch(mts: string, runs: [number, number][], classId = 0): PatchEntry {
  const area = runs.reduce((n, [, len]) => n + len, 0);
  return { mts, runs, area, classId, provenance: classId ? 'explicit' : 'none', conflict: false };
}

describe('classForDigit', () => {
  it('maps digits 1..9 then 0 onto the served palette order', () => {
    expect(classForDigit(CLASSES, 1)?.name).toBe('Building');
    expect(classForDigit(CLASSES, 2)?.name).toBe('Tree');
    expect(classForDigit(CLASSES, 9)?.name).toBe('Pole');
    expect(classForDigit(CLASSES, 0)?.name).toBe('Sidewalk');
  });

  it('never selects the reserved unlabeled class', () => {
    for (let digit = 0; digit <= 9; digit++) {
      expect(classForDigit(CLASSES, digit)?.id).not.toBe(0);
    }
  });

  it('labelable classes preserve palette order', () => {
    expect(labelableClasses(CLASSES).map((c) => c.id)).toEqual([
      1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11,
    ]);
  });
});

describe('PatchLookup', () => {
  const frame: FramePatches = {
    frame: 0,
    width: 8,
    height: 4,
    patches: [
      patch('aa', [[0, 4]]),
      patch('bb', [[8, 2], [20, 3]]), // two disconnected regions, one MTS
    ],
  };
  const lookup = new PatchLookup(frame);

  it('resolves pixels to their patch', () => {
    expect(lookup.at(0, 0)?.mts).toBe('aa');
    expect(lookup.at(3, 0)?.mts).toBe('aa');
    expect(lookup.at(0, 1)?.mts).toBe('bb');
    expect(lookup.at(4, 2)?.mts).toBe('bb'); // second region, same patch
  });

  it('returns null on background and out of bounds', () => {
    expect(lookup.at(6, 0)).toBeNull();
    expect(lookup.at(-1, 0)).toBeNull();
    expect(lookup.at(8, 0)).toBeNull();
    expect(lookup.at(0, 4)).toBeNull();
  });
});

describe('frameCoverage', () => {
  it('weights by area', () => {
    const patches = [patch('aa', [[0, 30]], 3), patch('bb', [[30, 70]])];
    expect(frameCoverage(patches)).toBeCloseTo(0.3, 12);
  });

  it('empty frame counts as covered', () => {
    expect(frameCoverage([])).toBe(1);
  });
});
