/** Pointer/wheel/keyboard to absolute instrument targets.
 *
 * Sign convention: dragging the pointer right increases yaw, and positive
 * yaw swings the *tip* toward -x (the handle above the trocar goes +x) —
 * the same inversion a surgeon feels through the fulcrum. Gains default
 * so full pointer travel spans the workspace clamps.
 */

import { makeMessage, type RigStateMsg, type WireMessage } from './protocol.js';

export interface InputMapping {
  yawPerPx: number;        // rad per pointer px (drag right -> yaw+)
  pitchPerPx: number;      // rad per pointer px (drag up -> pitch+)
  insertionPerNotch: number; // mm per wheel notch (scroll down -> deeper)
  gripStep: number;        // grip change per key press
  maxRateHz: number;       // input message rate ceiling
}

export const ANGLE_CLAMP = Math.PI / 3;
export const DEFAULT_MAPPING: InputMapping = {
  yawPerPx: ANGLE_CLAMP / 300,
  pitchPerPx: ANGLE_CLAMP / 300,
  insertionPerNotch: 5.0,
  gripStep: 0.25,
  maxRateHz: 120,
};

export class InputMapper {
  readonly mapping: InputMapping;
  private target: RigStateMsg;
  private dirty = false;
  private lastSentAt = -Infinity;
  private lastTimestamp = -1;
  private toolLength: number;

  constructor(mapping: InputMapping = DEFAULT_MAPPING,
              initial?: Partial<RigStateMsg>, toolLength = 250.0) {
    this.mapping = mapping;
    this.toolLength = toolLength;
    this.target = {
      yaw: 0, pitch: 0, insertion: 40.0, roll: 0, grip: 0,
      ...initial,
    };
  }

  get state(): RigStateMsg {
    return { ...this.target };
  }

  pointerDrag(dxPx: number, dyPx: number): void {
    this.target.yaw = clamp(this.target.yaw + dxPx * this.mapping.yawPerPx,
                            -ANGLE_CLAMP, ANGLE_CLAMP);
    this.target.pitch = clamp(this.target.pitch - dyPx * this.mapping.pitchPerPx,
                              -ANGLE_CLAMP, ANGLE_CLAMP);
    this.dirty = true;
  }

  wheel(notches: number): void {
    this.target.insertion = clamp(
      this.target.insertion + notches * this.mapping.insertionPerNotch,
      0, this.toolLength);
    this.dirty = true;
  }

  gripKey(close: boolean): void {
    this.target.grip = clamp(
      this.target.grip + (close ? 1 : -1) * this.mapping.gripStep, 0, 1);
    this.dirty = true;
  }

  setAbsolute(state: Partial<RigStateMsg>): void {
    this.target = { ...this.target, ...state };
    this.target.yaw = clamp(this.target.yaw, -ANGLE_CLAMP, ANGLE_CLAMP);
    this.target.pitch = clamp(this.target.pitch, -ANGLE_CLAMP, ANGLE_CLAMP);
    this.target.insertion = clamp(this.target.insertion, 0, this.toolLength);
    this.target.grip = clamp(this.target.grip, 0, 1);
    this.dirty = true;
  }

  /** Emit one input message if state changed and the rate cap allows.
   * Timestamps are strictly monotone in server session time. */
  sample(sessionTimeMs: number, nowMs: number): WireMessage | null {
    if (!this.dirty) return null;
    if (nowMs - this.lastSentAt < 1000 / this.mapping.maxRateHz) return null;
    this.lastSentAt = nowMs;
    this.dirty = false;
    const t = Math.max(Math.floor(sessionTimeMs), this.lastTimestamp + 1);
    this.lastTimestamp = t;
    return makeMessage('input', t, { rig: 0, state: this.state });
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return v < lo ? lo : v > hi ? hi : v;
}
