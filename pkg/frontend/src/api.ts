/**
 * Typed client for the annotation service HTTP API.
 *
 * The fetch implementation is injectable so tests and the scripted
 * session driver can run outside a browser.
 */

export interface ClassDef {
  id: number;
  name: string;
  color: [number, number, number];
}

export type Provenance = 'none' | 'explicit' | 'rule';

export interface PatchEntry {
  mts: string;
  runs: [number, number][];
  area: number;
  classId: number;
  provenance: Provenance;
  conflict: boolean;
}

export interface FramePatches {
  frame: number;
  width: number;
  height: number;
  patches: PatchEntry[];
}

export interface NextFrame {
  done: boolean;
  frame?: number;
  coveredFraction?: number;
  width?: number;
  height?: number;
}

export interface LabelResult {
  coveredFraction: number | null;
  frameComplete: boolean | null;
  newRules: number;
}

export interface Stats {
  totalPixels: number;
  nonSentinelPixels: number;
  annotationDensity: number;
  perClassPixels: Record<string, number>;
  mtsCoveredFraction: number;
  ruleCoveredFraction: number;
  ruleCount: number;
  presentedFrameCount: number;
  clickCount: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, (body as { error?: string }).error ?? 'request failed');
    }
    return body as T;
  }

  classes(): Promise<{ classes: ClassDef[] }> {
    return this.json('/api/classes');
  }

  nextFrame(): Promise<NextFrame> {
    return this.json('/api/frames/next');
  }

  framePatches(frame: number): Promise<FramePatches> {
    return this.json(`/api/frames/${frame}/patches`);
  }

  frameImageUrl(frame: number): string {
    return `${this.base}/api/frames/${frame}/image`;
  }

  label(mts: string, classId: number): Promise<LabelResult> {
    return this.json('/api/labels', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ mts, classId }),
    });
  }

  undo(): Promise<{ undone: number; mts: string; restoredClassId: number }> {
    return this.json('/api/undo', { method: 'POST', body: '{}' });
  }

  stats(): Promise<Stats> {
    return this.json('/api/stats');
  }
}
