/** Text HUD lines: phase, familiarization progress, connection banner. */

import type { FramePayload } from './protocol.js';

export interface HudModel {
  lines: string[];
  banner: string | null;
}

export function hudModel(frame: FramePayload | null,
                         connected: boolean,
                         retryAttempt: number | null): HudModel {
  if (!connected) {
    return { lines: [], banner: 'disconnected - scene frozen, press connect to resume' };
  }
  if (frame === null) {
    return { lines: ['waiting for session...'], banner: null };
  }
  const lines = [`phase: ${frame.phase}`];
  if (frame.sphere !== null) {
    const s = frame.sphere;
    const remaining = Math.max(0, s.required - s.touches_done);
    lines.push(`touch the sphere: ${remaining} to go`);
    lines.push(`time left: ${(s.time_left_ms / 1000).toFixed(1)} s (attempt ${s.attempt})`);
  }
  if (frame.phase === 'explore') {
    lines.push('palpate the surface; keep the gauge in the band');
    lines.push(`taps so far: ${frame.cone_count}`);
  }
  if (frame.phase === 'report') {
    lines.push('session complete - force map shown');
  }
  const banner = retryAttempt !== null
    ? `time ran out - try again (attempt ${retryAttempt})`
    : null;
  return { lines, banner };
}

export function drawHud(ctx: CanvasRenderingContext2D, model: HudModel,
                        width: number): void {
  ctx.save();
  ctx.font = '14px system-ui, sans-serif';
  ctx.fillStyle = '#e7f3ff';
  model.lines.forEach((line, i) => {
    ctx.fillText(line, 64, 28 + i * 20);
  });
  if (model.banner !== null) {
    ctx.fillStyle = 'rgba(224, 106, 90, 0.92)';
    ctx.fillRect(0, 0, width, 34);
    ctx.fillStyle = '#fff';
    ctx.fillText(model.banner, width / 2 - 160, 22);
  }
  ctx.restore();
}
