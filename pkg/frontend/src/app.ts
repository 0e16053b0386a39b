/** Browser entry point: wires the socket, input mapping, render loop and
 * the DOM quiz menus together. */

import { DEFAULT_GAUGE, drawGauge } from './gauge.js';
import { drawHud, hudModel } from './hud.js';
import { InputMapper } from './inputMap.js';
import type { FramePayload } from './protocol.js';
import { QuizViewModel } from './quizView.js';
import { buildSceneGeometry, Camera, renderScene, type SceneGeometry } from './scene3d.js';
import { ViewState } from './viewState.js';
import { PalpClient } from './wsClient.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>('scene');
  const ctx = canvas.getContext('2d')!;
  const view = new ViewState();
  const quiz = new QuizViewModel();
  const mapper = new InputMapper();
  let geometry: SceneGeometry | null = null;
  let fulcrum: [number, number, number] | null = null;
  let retryAttempt: number | null = null;

  const url = `ws://${location.hostname || 'localhost'}:${
    new URLSearchParams(location.search).get('port') ?? '8765'}/ws`;

  const client = new PalpClient(url, {
    onHello: () => {
      view.status = 'connected';
      const scenario = el<HTMLSelectElement>('scenario').value;
      client.start(scenario, Number(el<HTMLInputElement>('seed').value));
    },
    onScene: (scene) => {
      geometry = buildSceneGeometry(scene);
      fulcrum = scene.fulcrum;
    },
    onFrame: (frame) => view.frames.put(frame),
    onEvent: (kind, payload) => {
      if (kind === 'familiarization' && payload.result === 'timeout') {
        retryAttempt = Number(payload.attempt);
        setTimeout(() => { retryAttempt = null; }, 2500);
      }
      if (kind === 'answer') {
        quiz.recordGrade({
          item: String(payload.item),
          choice: Number(payload.choice),
          correct: Boolean(payload.correct),
        });
        renderQuizMenus();
      }
    },
    onReport: (report) => {
      view.report = report;
    },
    onError: (code, detail) => console.warn('server error:', code, detail),
    onClose: () => {
      view.status = 'disconnected';
    },
  });

  el<HTMLButtonElement>('connect').addEventListener('click', () => {
    view.status = 'connecting';
    view.report = null;
    client.connect();  // fresh hello every reconnect
  });

  // pointer: drag tilts the instrument (right drag steers the tip left via
  // the fulcrum); wheel drives insertion; G closes / R opens the grip
  let dragging = false;
  canvas.addEventListener('pointerdown', (ev) => {
    dragging = true;
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener('pointerup', () => { dragging = false; });
  canvas.addEventListener('pointermove', (ev) => {
    if (dragging) mapper.pointerDrag(ev.movementX, ev.movementY);
  });
  canvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    mapper.wheel(ev.deltaY / 100);
  }, { passive: false });
  window.addEventListener('keydown', (ev) => {
    if (ev.key === 'g') mapper.gripKey(true);
    if (ev.key === 'r') mapper.gripKey(false);
  });

  const sendTimer = setInterval(() => {
    const msg = mapper.sample(client.sessionTimeMs, performance.now());
    if (msg !== null && view.status === 'connected') client.send(msg);
  }, 1000 / 120);
  window.addEventListener('beforeunload', () => clearInterval(sendTimer));

  const questionsBox = el<HTMLDivElement>('questions');
  const answersBox = el<HTMLDivElement>('answers');

  function renderQuizMenus(): void {
    const panels = quiz.panels();
    questionsBox.replaceChildren(...panels.questions.map((q) => {
      const btn = document.createElement('button');
      btn.textContent = (q.answered ? '[done] ' : '') + q.label;
      btn.className = q.selected ? 'selected' : '';
      btn.onclick = () => { quiz.selectQuestion(q.id); renderQuizMenus(); };
      return btn;
    }));
    answersBox.replaceChildren(...panels.answers.map((a) => {
      const btn = document.createElement('button');
      const badge = a.verdict === 'correct' ? ' [correct]'
        : a.verdict === 'wrong' ? ' [wrong]' : '';
      btn.textContent = a.text + badge;
      btn.disabled = a.locked;
      btn.onclick = () => {
        const pick = quiz.chooseAnswer(a.index);
        if (pick !== null) client.sendAnswer(pick.item, pick.choice);
      };
      return btn;
    }));
    el<HTMLDivElement>('quiz-panels').style.display =
      panels.questions.length > 0 ? 'flex' : 'none';
  }

  function frameTick(): void {
    const frame: FramePayload | null = view.currentFrame();
    const camera = new Camera(view.camera, canvas.width, canvas.height);
    const cones = view.report !== null && view.overlays.cones
      ? view.report.cones : [];
    renderScene(ctx, camera, geometry, frame, cones, view.overlays, fulcrum);
    if (frame !== null && view.overlays.gauge) {
      drawGauge(ctx, frame.force_magnitude, frame.band, DEFAULT_GAUGE);
    }
    drawHud(ctx, hudModel(frame, view.status === 'connected', retryAttempt),
            canvas.width);
    if (frame !== null && frame.quiz !== null) {
      quiz.updateItems(frame.quiz.items, frame.quiz.score);
      renderQuizMenus();
    }
    requestAnimationFrame(frameTick);
  }

  for (const name of ['cones', 'gauge', 'patchGrid'] as const) {
    el<HTMLInputElement>(`toggle-${name}`).addEventListener('change', (ev) => {
      view.overlays[name] = (ev.target as HTMLInputElement).checked;
    });
  }

  requestAnimationFrame(frameTick);
}

main();
