/** End-to-end smoke against a live backend: connect, pass familiarization
 * with scripted pointer events, palpate once, answer the quiz, render the
 * force map from the report, then verify the recorded session byte-exactly
 * with the backend CLI. Skipped when SKIP_E2E is set. */

import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import WebSocket from 'ws';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { InputMapper } from '../src/inputMap.js';
import type { FramePayload, ReportPayload, ScenePayload, Vec3 } from '../src/protocol.js';
import { buildSceneGeometry, Camera, renderScene } from '../src/scene3d.js';
import { ViewState } from '../src/viewState.js';
import { PalpClient, type SocketLike } from '../src/wsClient.js';

const execFileAsync = promisify(execFile);
const PORT = 8940 + (process.pid % 50);
const SKIP = Boolean(process.env.SKIP_E2E);

let server: ChildProcess | null = null;
let dataDir = '';

function wsFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`http://127.0.0.1:${PORT}/healthz`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await sleep(100);
  }
  throw new Error('backend did not come up');
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Instrument state whose tip reaches a target point (mirrors the trocar
 * geometry: positive yaw swings the tip toward -x). */
function ikTarget(fulcrum: Vec3, tip: Vec3) {
  const dx = tip[0] - fulcrum[0];
  const dy = tip[1] - fulcrum[1];
  const dz = tip[2] - fulcrum[2];
  const insertion = Math.hypot(dx, dy, dz);
  const pitch = Math.asin(dy / insertion);
  const yaw = Math.atan2(-dx / insertion, -dz / insertion);
  return { yaw, pitch, insertion };
}

/** Scripted pointer/wheel events that steer the mapper to a target state. */
function steerWithPointer(mapper: InputMapper,
                          target: { yaw: number; pitch: number; insertion: number }): void {
  const s = mapper.state;
  mapper.pointerDrag((target.yaw - s.yaw) / mapper.mapping.yawPerPx,
                     -(target.pitch - s.pitch) / mapper.mapping.pitchPerPx);
  mapper.wheel((target.insertion - s.insertion) / mapper.mapping.insertionPerNotch);
}

beforeAll(async () => {
  if (SKIP) return;
  dataDir = mkdtempSync(join(tmpdir(), 'palp-e2e-'));
  server = spawn('palpatron', ['serve', '--port', String(PORT)], {
    env: { ...process.env, PALPATRON_DATA_DIR: dataDir },
    stdio: 'ignore',
  });
  await waitForServer();
}, 30_000);

afterAll(async () => {
  server?.kill();
});

describe.skipIf(SKIP)('end-to-end smoke', () => {
  it('familiarizes, palpates, answers, renders cones, and replays clean', async () => {
    const view = new ViewState();
    const mapper = new InputMapper();
    let scene: ScenePayload | null = null;
    let report: ReportPayload | null = null;
    let phase = '';
    let closed = false;

    const client = new PalpClient(`ws://127.0.0.1:${PORT}/ws`, {
      onHello: () => client.start('healthy', 42),
      onScene: (s) => { scene = s; },
      onFrame: (f: FramePayload) => { view.frames.put(f); phase = f.phase; },
      onReport: (r) => { report = r; },
      onClose: () => { closed = true; },
    }, wsFactory);
    client.connect();

    const fulcrum: Vec3 = [0, 0, 150];
    const deadline = Date.now() + 45_000;
    let pressed = false;
    let pressStarted = 0;
    let answered = false;

    while (Date.now() < deadline) {
      await sleep(8);
      const frame = view.currentFrame();
      if (frame === null) continue;

      if (frame.phase === 'familiarize' && frame.sphere?.center) {
        steerWithPointer(mapper, ikTarget(fulcrum, frame.sphere.center));
      } else if (frame.phase === 'explore' && !pressed) {
        // palpate straight below the trocar; press ~4 mm past contact
        const target = ikTarget(fulcrum, [8, 4, 52]);
        steerWithPointer(mapper, target);
        if (frame.force_magnitude > 0.5) {
          if (pressStarted === 0) pressStarted = Date.now();
          if (Date.now() - pressStarted > 200) {
            steerWithPointer(mapper, ikTarget(fulcrum, [8, 4, 80]));
            pressed = true;
          }
        }
      } else if (frame.phase !== 'familiarize' && pressed && !answered
                 && frame.quiz !== null && frame.force_magnitude === 0) {
        answered = true;
        for (const item of frame.quiz.items) {
          client.sendAnswer(item.id, 0);
        }
      }
      const msg = mapper.sample(client.sessionTimeMs, performance.now());
      if (msg !== null) client.send(msg);
      if (report !== null && phase === 'report') break;
    }

    expect(scene).not.toBeNull();
    expect(pressed).toBe(true);
    expect(answered).toBe(true);
    expect(report).not.toBeNull();
    const rep = report! as ReportPayload;
    expect(rep.schema).toBe('palpreport/1');
    expect(rep.cones.length).toBeGreaterThanOrEqual(1);
    expect(phase).toBe('report');

    // render the report view and confirm at least one cone is drawn
    const geom = buildSceneGeometry(scene!);
    const cam = new Camera(view.camera, 1280, 800);
    const ops: string[] = [];
    const grad = { addColorStop: () => undefined };
    const ctx = new Proxy({}, {
      get: (_t, prop: string) =>
        prop === 'createRadialGradient' ? () => grad
          : (..._a: unknown[]) => { ops.push(prop); },
      set: () => true,
    }) as never;
    const stats = renderScene(ctx, cam, geom, view.lastFrame, rep.cones,
                              { cones: true, gauge: true, patchGrid: false },
                              scene!.fulcrum);
    expect(stats.trianglesDrawn).toBeGreaterThan(100);
    expect(stats.conesDrawn).toBeGreaterThanOrEqual(1);

    client.close();
    for (let i = 0; i < 100 && !closed; i++) await sleep(50);

    // the finalized session file must replay byte-exactly
    let files: string[] = [];
    for (let i = 0; i < 60; i++) {
      files = readdirSync(dataDir).filter((f) => f.endsWith('.jsonl'));
      if (files.length > 0) break;
      await sleep(100);
    }
    expect(files.length).toBe(1);
    await sleep(300);  // let the writer close
    const { stdout } = await execFileAsync(
      'palpatron', ['replay', join(dataDir, files[0]), '--verify']);
    expect(stdout).toContain('identical');
  }, 90_000);
});
