/** palpwire/1 message types and guards. Every displayed number originates
 * from a server message; the client never computes simulation truth. */

export const WIRE_VERSION = 'palpwire/1';

export type Vec3 = [number, number, number];

export interface RigStateMsg {
  yaw: number;
  pitch: number;
  insertion: number;
  roll: number;
  grip: number;
}

export type Phase = 'familiarize' | 'explore' | 'quiz' | 'report';
export type GaugeZone = 'below' | 'in_band' | 'above';

export interface WireMessage {
  v: string;
  type: string;
  t: number;
  payload: Record<string, unknown>;
}

export interface SpherePayload {
  center: Vec3 | null;
  radius: number;
  touches_done: number;
  required: number;
  attempt: number;
  time_left_ms: number;
}

export interface QuizItemPayload {
  id: string;
  attribute: string;
  prompt: string;
  choices: string[];
  answered: boolean;
}

export interface FramePayload {
  phase: Phase;
  tip: Vec3;
  direction: Vec3;
  force: Vec3;
  force_magnitude: number;
  gauge: GaugeZone;
  penetration: number;
  dimple: { center: Vec3; depth: number; radius: number } | null;
  sphere: SpherePayload | null;
  quiz: { items: QuizItemPayload[]; score: number } | null;
  band: { low: number; high: number };
  cone_count: number;
}

export interface ScenePayload {
  scenario: string;
  seed: number;
  vertices: number[];
  triangles: number[];
  patches: number[];
  appearance: { base_color: [number, number, number]; pallor: number };
  visible_features: { kind: string; center: Vec3; sigma: number }[];
  band: { low: number; high: number };
  fulcrum: Vec3;
}

export interface ConePayload {
  base: Vec3;
  axis: Vec3;
  height: number;
  radius: number;
}

export interface ReportPayload {
  schema: string;
  classification: string;
  metrics: Record<string, number | null>;
  cones: ConePayload[];
  band: { low: number; high: number };
  [key: string]: unknown;
}

export function makeMessage(
  type: string,
  t: number,
  payload: Record<string, unknown>,
): WireMessage {
  return { v: WIRE_VERSION, type, t, payload };
}

/** Parse and shape-check one server text frame; null for anything alien. */
export function parseServerMessage(raw: string): WireMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== 'object' || obj === null) return null;
  const msg = obj as Record<string, unknown>;
  if (msg.v !== WIRE_VERSION) return null;
  if (typeof msg.type !== 'string' || typeof msg.t !== 'number') return null;
  if (typeof msg.payload !== 'object' || msg.payload === null) return null;
  return msg as unknown as WireMessage;
}

export function isFrame(msg: WireMessage): boolean {
  return msg.type === 'frame';
}

export function isEvent(msg: WireMessage, kind?: string): boolean {
  return msg.type === 'event' && (kind === undefined || msg.payload.kind === kind);
}
