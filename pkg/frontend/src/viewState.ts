/** Client-side state: a latest-value mailbox per stream so the render loop
 * only ever sees the freshest snapshot (stale frames are discarded). */

import type { FramePayload, ReportPayload, ScenePayload } from './protocol.js';

export class LatestBox<T> {
  private value: T | null = null;
  private _dropped = 0;

  put(v: T): void {
    if (this.value !== null) this._dropped += 1;
    this.value = v;
  }

  /** Returns and clears the newest value; null when nothing new arrived. */
  take(): T | null {
    const v = this.value;
    this.value = null;
    return v;
  }

  peek(): T | null {
    return this.value;
  }

  get dropped(): number {
    return this._dropped;
  }
}

export type ConnectionStatus = 'disconnected' | 'connecting' | 'connected';

export interface OverlayToggles {
  cones: boolean;
  gauge: boolean;
  patchGrid: boolean;
}

export interface CameraParams {
  yaw: number;     // orbit around +z, radians
  pitch: number;   // elevation, radians
  distance: number;
  target: [number, number, number];
}

export class ViewState {
  readonly frames = new LatestBox<FramePayload>();
  scene: ScenePayload | null = null;
  report: ReportPayload | null = null;
  lastFrame: FramePayload | null = null;
  status: ConnectionStatus = 'disconnected';
  overlays: OverlayToggles = { cones: true, gauge: true, patchGrid: false };
  camera: CameraParams = {
    yaw: 0.6,
    pitch: 0.5,
    distance: 420,
    target: [0, 0, 30],
  };
  banner: string | null = null;

  /** Freshest frame for this render pass (holds the last one if none new). */
  currentFrame(): FramePayload | null {
    const fresh = this.frames.take();
    if (fresh !== null) this.lastFrame = fresh;
    return this.lastFrame;
  }
}
