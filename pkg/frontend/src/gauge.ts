/** Left-anchored force gauge with the recommended band marked. */

import type { GaugeZone } from './protocol.js';

export interface GaugeLayout {
  x: number;
  y: number;
  width: number;
  height: number;
  maxForce: number;
}

export const DEFAULT_GAUGE: GaugeLayout = {
  x: 14, y: 60, width: 26, height: 320, maxForce: 4.5,
};

export interface GaugeGeometry {
  fillTop: number;     // y of the force fill's top edge
  fillHeight: number;
  bandTop: number;     // y span of the marked band region
  bandBottom: number;
  zone: GaugeZone;
}

/** Pixel geometry for a force reading; y grows downward, 0 N at the
 * bottom of the bar. */
export function gaugeGeometry(
  force: number,
  band: { low: number; high: number },
  layout: GaugeLayout = DEFAULT_GAUGE,
): GaugeGeometry {
  const frac = Math.min(Math.max(force / layout.maxForce, 0), 1);
  const fillHeight = frac * layout.height;
  const yOf = (f: number) =>
    layout.y + layout.height - (Math.min(f, layout.maxForce) / layout.maxForce) * layout.height;
  const zone: GaugeZone =
    force < band.low ? 'below' : force > band.high ? 'above' : 'in_band';
  return {
    fillTop: layout.y + layout.height - fillHeight,
    fillHeight,
    bandTop: yOf(band.high),
    bandBottom: yOf(band.low),
    zone,
  };
}

const ZONE_COLORS: Record<GaugeZone, string> = {
  below: '#7aa7d9',
  in_band: '#5fcf7f',
  above: '#e06a5a',
};

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  force: number,
  band: { low: number; high: number },
  layout: GaugeLayout = DEFAULT_GAUGE,
): void {
  const g = gaugeGeometry(force, band, layout);
  ctx.save();
  ctx.fillStyle = 'rgba(10, 14, 20, 0.72)';
  ctx.fillRect(layout.x - 4, layout.y - 26, layout.width + 34, layout.height + 54);
  ctx.fillStyle = '#1c2633';
  ctx.fillRect(layout.x, layout.y, layout.width, layout.height);
  // marked band region
  ctx.fillStyle = 'rgba(95, 207, 127, 0.25)';
  ctx.fillRect(layout.x, g.bandTop, layout.width, g.bandBottom - g.bandTop);
  ctx.strokeStyle = '#5fcf7f';
  ctx.strokeRect(layout.x, g.bandTop, layout.width, g.bandBottom - g.bandTop);
  // force fill
  ctx.fillStyle = ZONE_COLORS[g.zone];
  ctx.fillRect(layout.x, g.fillTop, layout.width, g.fillHeight);
  ctx.fillStyle = '#e7f3ff';
  ctx.font = '12px system-ui, sans-serif';
  ctx.fillText(`${force.toFixed(2)} N`, layout.x, layout.y - 8);
  ctx.fillText(`${band.low}-${band.high}`, layout.x, layout.y + layout.height + 16);
  ctx.restore();
}
