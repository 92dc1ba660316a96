/**
 * Annotation session controller: the live propagation loop.
 *
 * Pick a class, click a patch, watch coverage advance.  Clicks tint
 * optimistically and roll back if the service rejects them, so every
 * surviving tint corresponds to an acknowledged click or a served
 * pre-annotation.  When the service reports the current frame complete,
 * the controller advances to the scheduler's next frame automatically.
 */

import { ApiClient, ApiError } from './api.js';
import type { ClassDef, FramePatches, PatchEntry, Provenance, Stats } from './api.js';
import { PatchLookup, ViewState, initialViewState } from './state.js';

export interface ViewHooks {
  render(): void;
  frameChanged(frame: number): void;
  toast(message: string): void;
}

export interface Progress {
  clicks: number;
  presented: number;
  density: number;
  rules: number;
}

export class AnnotationController {
  state: ViewState = initialViewState();
  classes: ClassDef[] = [];
  frame: FramePatches | null = null;
  lookup: PatchLookup | null = null;
  progress: Progress = { clicks: 0, presented: 0, density: 0, rules: 0 };

  constructor(
    private readonly api: ApiClient,
    private readonly hooks: ViewHooks,
  ) {}

  async start(): Promise<void> {
    this.classes = (await this.api.classes()).classes;
    const first = this.classes.find((c) => c.id !== 0);
    if (first) this.state.selectedClass = first.id;
    await this.advance();
  }

  /** Ask the scheduler for the next frame and load it. */
  async advance(): Promise<void> {
    const next = await this.api.nextFrame();
    if (next.done || next.frame === undefined) {
      this.state.done = true;
      this.state.currentFrame = null;
      this.frame = null;
      this.lookup = null;
      await this.refreshProgress();
      this.hooks.render();
      return;
    }
    this.state.coverageGauge = next.coveredFraction ?? 0;
    await this.loadFrame(next.frame);
  }

  async loadFrame(frame: number): Promise<void> {
    this.frame = await this.api.framePatches(frame);
    this.lookup = new PatchLookup(this.frame);
    this.state.currentFrame = frame;
    this.state.hoveredPatch = null;
    await this.refreshProgress();
    this.hooks.frameChanged(frame);
    this.hooks.render();
  }

  selectClass(classId: number): void {
    if (this.classes.some((c) => c.id === classId)) {
      this.state.selectedClass = classId;
      this.hooks.render();
    }
  }

  hover(x: number, y: number): void {
    const patch = this.lookup?.at(x, y) ?? null;
    const mts = patch ? patch.mts : null;
    if (mts !== this.state.hoveredPatch) {
      this.state.hoveredPatch = mts;
      this.hooks.render();
    }
  }

  /**
   * Label the patch under a pixel with the selected class.
   *
   * Returns true when a request was sent.  Clicking background sends
   * nothing; clicking a patch already carrying the selected explicit
   * label is a no-op.
   */
  async clickPixel(x: number, y: number): Promise<boolean> {
    if (!this.lookup || !this.frame) return false;
    const patch = this.lookup.at(x, y);
    if (!patch) return false;
    if (patch.provenance === 'explicit' && patch.classId === this.state.selectedClass) {
      return false;
    }

    const before: { classId: number; provenance: Provenance } = {
      classId: patch.classId,
      provenance: patch.provenance,
    };
    patch.classId = this.state.selectedClass;
    patch.provenance = 'explicit';
    this.hooks.render();

    try {
      const result = await this.api.label(patch.mts, this.state.selectedClass);
      this.progress.clicks += 1;
      if (result.coveredFraction !== null) {
        this.state.coverageGauge = result.coveredFraction;
      }
      if (result.frameComplete) {
        await this.advance();
      } else {
        this.hooks.render();
      }
      return true;
    } catch (error) {
      patch.classId = before.classId;
      patch.provenance = before.provenance;
      this.hooks.render();
      const message = error instanceof ApiError ? error.message : String(error);
      this.hooks.toast(`label rejected: ${message}`);
      return true;
    }
  }

  async undoLast(): Promise<void> {
    try {
      await this.api.undo();
      if (this.state.currentFrame !== null) {
        await this.loadFrame(this.state.currentFrame);
      }
    } catch (error) {
      const message = error instanceof ApiError ? error.message : String(error);
      this.hooks.toast(`undo failed: ${message}`);
    }
  }

  unlabeledPatches(): PatchEntry[] {
    return this.frame ? this.frame.patches.filter((p) => p.classId === 0) : [];
  }

  private async refreshProgress(): Promise<void> {
    const stats: Stats = await this.api.stats();
    this.progress = {
      clicks: stats.clickCount,
      presented: stats.presentedFrameCount,
      density: stats.annotationDensity,
      rules: stats.ruleCount,
    };
  }
}
