import { describe, expect, it } from 'vitest';

import { DEFAULT_GAUGE, gaugeGeometry } from '../src/gauge.js';
import { hudModel } from '../src/hud.js';
import { ANGLE_CLAMP, DEFAULT_MAPPING, InputMapper } from '../src/inputMap.js';
import {
  isEvent, isFrame, makeMessage, parseServerMessage, WIRE_VERSION,
} from '../src/protocol.js';
import { QuizViewModel } from '../src/quizView.js';
import {
  buildSceneGeometry, Camera, faceColor, renderScene,
} from '../src/scene3d.js';
import { LatestBox, ViewState } from '../src/viewState.js';

describe('protocol', () => {
  it('round-trips its own messages', () => {
    const msg = makeMessage('input', 12, { rig: 0 });
    const parsed = parseServerMessage(JSON.stringify(msg));
    expect(parsed).not.toBeNull();
    expect(parsed!.type).toBe('input');
    expect(parsed!.v).toBe(WIRE_VERSION);
  });

  it('rejects junk and version mismatches', () => {
    expect(parseServerMessage('{nope')).toBeNull();
    expect(parseServerMessage('null')).toBeNull();
    expect(parseServerMessage('[1,2]')).toBeNull();
    expect(parseServerMessage(JSON.stringify(
      { v: 'palpwire/2', type: 'frame', t: 0, payload: {} }))).toBeNull();
    expect(parseServerMessage(JSON.stringify(
      { v: WIRE_VERSION, type: 'frame', t: 0 }))).toBeNull();
  });

  it('classifies frames and events', () => {
    const frame = parseServerMessage(JSON.stringify(
      makeMessage('frame', 5, { phase: 'explore' })))!;
    expect(isFrame(frame)).toBe(true);
    const scene = parseServerMessage(JSON.stringify(
      makeMessage('event', 0, { kind: 'scene' })))!;
    expect(isEvent(scene, 'scene')).toBe(true);
    expect(isEvent(scene, 'touch')).toBe(false);
  });
});

describe('input mapping', () => {
  it('drag right yields positive yaw (tip swings left via the fulcrum)', () => {
    const m = new InputMapper();
    m.pointerDrag(120, 0);
    expect(m.state.yaw).toBeGreaterThan(0);
  });

  it('wheel notches move insertion by the documented gain', () => {
    const m = new InputMapper();
    const before = m.state.insertion;
    m.wheel(3);
    expect(m.state.insertion).toBeCloseTo(before + 15.0, 9);
  });

  it('clamps to the workspace', () => {
    const m = new InputMapper();
    m.pointerDrag(1e6, -1e6);
    expect(m.state.yaw).toBeCloseTo(ANGLE_CLAMP, 9);
    expect(m.state.pitch).toBeCloseTo(ANGLE_CLAMP, 9);
    m.wheel(-1e6);
    expect(m.state.insertion).toBe(0);
    m.gripKey(true); m.gripKey(true); m.gripKey(true);
    m.gripKey(true); m.gripKey(true);
    expect(m.state.grip).toBe(1);
  });

  it('emits nothing without events and throttles at the rate cap', () => {
    const m = new InputMapper();
    expect(m.sample(0, 0)).toBeNull();           // no events -> no messages
    m.pointerDrag(5, 0);
    expect(m.sample(10, 0)).not.toBeNull();
    m.pointerDrag(5, 0);
    expect(m.sample(11, 1)).toBeNull();          // < 1000/120 ms later
    expect(m.sample(20, 100)).not.toBeNull();
  });

  it('timestamps are strictly monotone even when session time stalls', () => {
    const m = new InputMapper();
    const ts: number[] = [];
    for (let i = 0; i < 5; i++) {
      m.pointerDrag(1, 0);
      const msg = m.sample(7, i * 100);          // session time frozen at 7
      if (msg !== null) ts.push(msg.t);
    }
    expect(ts.length).toBe(5);
    for (let i = 1; i < ts.length; i++) expect(ts[i]).toBeGreaterThan(ts[i - 1]);
  });
});

describe('latest-value mailbox', () => {
  it('keeps only the newest frame and counts drops', () => {
    const box = new LatestBox<number>();
    box.put(1); box.put(2); box.put(3);
    expect(box.take()).toBe(3);
    expect(box.take()).toBeNull();
    expect(box.dropped).toBe(2);
  });

  it('view state holds the last frame between arrivals', () => {
    const vs = new ViewState();
    vs.frames.put({ phase: 'explore' } as never);
    expect(vs.currentFrame()).not.toBeNull();
    expect(vs.currentFrame()).not.toBeNull(); // held, not cleared
  });
});

describe('gauge', () => {
  const band = { low: 2.1, high: 2.5 };

  it('marks the band region and fills inside it at 2.3 N', () => {
    const g = gaugeGeometry(2.3, band, DEFAULT_GAUGE);
    expect(g.zone).toBe('in_band');
    expect(g.fillTop).toBeGreaterThanOrEqual(g.bandTop);
    expect(g.fillTop).toBeLessThanOrEqual(g.bandBottom);
    expect(g.bandTop).toBeLessThan(g.bandBottom);
  });

  it('zones split below/in/above on the closed interval', () => {
    expect(gaugeGeometry(2.1, band).zone).toBe('in_band');
    expect(gaugeGeometry(2.5, band).zone).toBe('in_band');
    expect(gaugeGeometry(2.09, band).zone).toBe('below');
    expect(gaugeGeometry(2.51, band).zone).toBe('above');
  });

  it('fill height grows with force', () => {
    expect(gaugeGeometry(3.0, band).fillHeight)
      .toBeGreaterThan(gaugeGeometry(1.0, band).fillHeight);
  });
});

describe('hud', () => {
  it('shows countdown and remaining touches in familiarization', () => {
    const model = hudModel({
      phase: 'familiarize',
      sphere: { center: [0, 0, 0], radius: 10, touches_done: 2,
                required: 5, attempt: 1, time_left_ms: 12_400 },
      cone_count: 0,
    } as never, true, null);
    expect(model.lines.join(' ')).toContain('3 to go');
    expect(model.lines.join(' ')).toContain('12.4 s');
  });

  it('disconnect shows the reconnect banner', () => {
    const model = hudModel(null, false, null);
    expect(model.banner).toContain('disconnected');
  });

  it('timeout shows the retry prompt with the attempt number', () => {
    const model = hudModel({ phase: 'familiarize', sphere: null,
                             cone_count: 0 } as never, true, 2);
    expect(model.banner).toContain('attempt 2');
  });
});

describe('quiz view model', () => {
  const items = [
    { id: 'q1', attribute: 'color', prompt: 'Color?',
      choices: ['red', 'pale'], answered: false },
    { id: 'q2', attribute: 'diagnosis', prompt: 'Diagnosis?',
      choices: ['healthy', 'cirrhosis'], answered: false },
  ];

  it('splits questions left and answers right for the selection', () => {
    const vm = new QuizViewModel();
    vm.updateItems(items as never, 0);
    const panels = vm.panels();
    expect(panels.questions.map((q) => q.id)).toEqual(['q1', 'q2']);
    expect(panels.answers.map((a) => a.text)).toEqual(['red', 'pale']);
    vm.selectQuestion('q2');
    expect(vm.panels().answers.map((a) => a.text))
      .toEqual(['healthy', 'cirrhosis']);
  });

  it('locks answered questions and badges the verdict', () => {
    const vm = new QuizViewModel();
    vm.updateItems(items as never, 0);
    expect(vm.chooseAnswer(1)).toEqual({ item: 'q1', choice: 1 });
    vm.recordGrade({ item: 'q1', choice: 1, correct: false });
    expect(vm.chooseAnswer(0)).toBeNull();  // locked after grading
    const answers = vm.panels().answers;
    expect(answers[1].verdict).toBe('wrong');
    expect(answers[1].locked).toBe(true);
  });
});

function mockCtx(): CanvasRenderingContext2D & { ops: string[] } {
  const ops: string[] = [];
  const grad = { addColorStop: () => undefined };
  const handler: ProxyHandler<Record<string, unknown>> = {
    get(_t, prop: string) {
      if (prop === 'ops') return ops;
      if (prop === 'createRadialGradient') return () => grad;
      return (..._args: unknown[]) => { ops.push(prop); };
    },
    set() { return true; },
  };
  return new Proxy({}, handler) as never;
}

describe('scene renderer', () => {
  const scene = {
    scenario: 'tumoral',
    seed: 1,
    // a little tetrahedron-ish open shell
    vertices: [0, 0, 30, 40, 0, 0, 0, 40, 0, -40, 0, 0],
    triangles: [0, 2, 1, 0, 3, 2],
    patches: [0, 1],
    appearance: { base_color: [0.55, 0.27, 0.23] as [number, number, number],
                  pallor: 0 },
    visible_features: [
      { kind: 'surface_cyst', center: [0, 0, 30] as [number, number, number],
        sigma: 12 },
    ],
    band: { low: 2.1, high: 2.5 },
    fulcrum: [0, 0, 150] as [number, number, number],
  };

  const frame = {
    phase: 'report',
    tip: [0, 0, 40], direction: [0, 0, -1],
    force: [0, 0, 1.0], force_magnitude: 1.0, gauge: 'below',
    penetration: 1.2,
    dimple: { center: [0, 0, 29] as [number, number, number],
              depth: 1.2, radius: 7.2 },
    sphere: { center: [10, 10, 60] as [number, number, number], radius: 10,
              touches_done: 0, required: 5, attempt: 1, time_left_ms: 1000 },
    quiz: null,
    band: { low: 2.1, high: 2.5 },
    cone_count: 1,
  };

  it('draws mesh, dimple, sphere and cones; honors the cone toggle', () => {
    const geom = buildSceneGeometry(scene as never);
    const cam = new Camera({ yaw: 0.5, pitch: 0.5, distance: 300,
                             target: [0, 0, 0] }, 640, 480);
    const cones = [{ base: [0, 0, 30] as [number, number, number],
                     axis: [0, 0, -1] as [number, number, number],
                     height: 12, radius: 5 }];
    const ctx = mockCtx();
    const stats = renderScene(ctx, cam, geom, frame as never, cones,
                              { cones: true, gauge: true, patchGrid: false },
                              scene.fulcrum);
    expect(stats.trianglesDrawn).toBeGreaterThan(0);
    expect(stats.dimpleDrawn).toBe(true);
    expect(stats.sphereDrawn).toBe(true);
    expect(stats.conesDrawn).toBe(1);
    const off = renderScene(ctx, cam, geom, frame as never, cones,
                            { cones: false, gauge: true, patchGrid: false },
                            scene.fulcrum);
    expect(off.conesDrawn).toBe(0);
  });

  it('pallor makes every face visibly paler', () => {
    const geomRed = buildSceneGeometry(
      { ...scene, visible_features: [] } as never);
    const geomPale = buildSceneGeometry(
      { ...scene, visible_features: [],
        appearance: { base_color: [0.55, 0.27, 0.23], pallor: 0.5 } } as never);
    const red = faceColor(geomRed, 0, 1.0, false);
    const pale = faceColor(geomPale, 0, 1.0, false);
    const blue = (c: string) => Number(c.match(/rgb\(\d+,\d+,(\d+)\)/)![1]);
    expect(blue(pale)).toBeGreaterThan(blue(red));
  });

  it('nearer points project larger offsets (perspective)', () => {
    const cam = new Camera({ yaw: 0, pitch: 0, distance: 200,
                             target: [0, 0, 0] }, 640, 480);
    const near = cam.project([30, -100, 0]);
    const far = cam.project([30, 100, 0]);
    expect(Math.abs(near.x - 320)).toBeGreaterThan(Math.abs(far.x - 320));
    expect(near.depth).toBeLessThan(far.depth);
  });
});
