/** Minimal software 3D view: orbit camera, painter-sorted flat-shaded
 * mesh, plus the overlays (dimple, familiarization sphere, force cones,
 * instrument shaft). Pure math everywhere except the 2D canvas calls, so
 * the renderer is testable with a recording context stub. */

import type { CameraParams, OverlayToggles } from './viewState.js';
import type {
  ConePayload, FramePayload, ScenePayload, Vec3,
} from './protocol.js';

export interface Projected {
  x: number;
  y: number;
  depth: number;
}

export class Camera {
  constructor(public params: CameraParams,
              public width: number, public height: number,
              public focal = 700) {}

  /** World (mm) to screen; depth grows away from the eye. */
  project(p: Vec3): Projected {
    const { yaw, pitch, distance, target } = this.params;
    const cx = p[0] - target[0];
    const cy = p[1] - target[1];
    const cz = p[2] - target[2];
    // orbit: rotate world so the camera looks down -y' toward the target
    const sy = Math.sin(yaw), cyw = Math.cos(yaw);
    const sp = Math.sin(pitch), cp = Math.cos(pitch);
    const rx = cx * cyw - cy * sy;
    const ry0 = cx * sy + cy * cyw;
    const ry = ry0 * cp - cz * sp;
    const rz = ry0 * sp + cz * cp;
    const depth = distance + ry;
    const scale = this.focal / Math.max(depth, 1);
    return {
      x: this.width / 2 + rx * scale,
      y: this.height / 2 - rz * scale,
      depth,
    };
  }
}

export interface DrawStats {
  trianglesDrawn: number;
  conesDrawn: number;
  dimpleDrawn: boolean;
  sphereDrawn: boolean;
  shaftDrawn: boolean;
  patchGridDrawn: boolean;
}

const PALE: Vec3 = [0.85, 0.78, 0.7];
const CYST_TINT: Vec3 = [0.78, 0.72, 0.5];

function mix(a: Vec3, b: Vec3, f: number): Vec3 {
  return [a[0] + (b[0] - a[0]) * f,
          a[1] + (b[1] - a[1]) * f,
          a[2] + (b[2] - a[2]) * f];
}

function css(c: Vec3, shade: number): string {
  const s = (v: number) => Math.round(255 * Math.min(Math.max(v * shade, 0), 1));
  return `rgb(${s(c[0])},${s(c[1])},${s(c[2])})`;
}

export interface SceneGeometry {
  vertices: Float64Array;     // 3N
  triangles: Int32Array;      // 3T
  patches: Int32Array;        // T
  baseColor: Vec3;
  pallor: number;
  featureTint: Float32Array;  // per-vertex 0..1 visible-lesion tint
}

/** Precompute per-vertex discoloration from the visible features. */
export function buildSceneGeometry(scene: ScenePayload): SceneGeometry {
  const vertices = Float64Array.from(scene.vertices);
  const n = vertices.length / 3;
  const featureTint = new Float32Array(n);
  for (const f of scene.visible_features) {
    if (f.kind !== 'surface_cyst') continue;
    const r2max = (2.5 * f.sigma) ** 2;
    for (let i = 0; i < n; i++) {
      const dx = vertices[3 * i] - f.center[0];
      const dy = vertices[3 * i + 1] - f.center[1];
      const dz = vertices[3 * i + 2] - f.center[2];
      const r2 = dx * dx + dy * dy + dz * dz;
      if (r2 < r2max) {
        const w = Math.exp(-r2 / (2 * f.sigma * f.sigma));
        if (w > featureTint[i]) featureTint[i] = w;
      }
    }
  }
  return {
    vertices,
    triangles: Int32Array.from(scene.triangles),
    patches: Int32Array.from(scene.patches),
    baseColor: scene.appearance.base_color,
    pallor: scene.appearance.pallor,
    featureTint,
  };
}

/** Per-face fill color: scenario tint, lesion discoloration, lambertian
 * shade, optional patch-parity overlay. */
export function faceColor(geom: SceneGeometry, tri: number,
                          shade: number, patchGrid: boolean): string {
  const t = geom.triangles;
  const tint = (geom.featureTint[t[3 * tri]] + geom.featureTint[t[3 * tri + 1]]
    + geom.featureTint[t[3 * tri + 2]]) / 3;
  let color = mix(geom.baseColor, PALE, geom.pallor);
  color = mix(color, CYST_TINT, Math.min(tint * 1.4, 1));
  if (patchGrid && geom.patches[tri] % 2 === 0) {
    color = mix(color, [1, 1, 1], 0.12);
  }
  return css(color, shade);
}

type Ctx2D = CanvasRenderingContext2D;

export function renderScene(
  ctx: Ctx2D,
  camera: Camera,
  geom: SceneGeometry | null,
  frame: FramePayload | null,
  cones: ConePayload[],
  overlays: OverlayToggles,
  fulcrum: Vec3 | null,
): DrawStats {
  const stats: DrawStats = {
    trianglesDrawn: 0, conesDrawn: 0, dimpleDrawn: false,
    sphereDrawn: false, shaftDrawn: false,
    patchGridDrawn: overlays.patchGrid,
  };
  ctx.fillStyle = '#0b0e16';
  ctx.fillRect(0, 0, camera.width, camera.height);
  if (geom === null) return stats;

  const v = geom.vertices;
  const nVerts = v.length / 3;
  const proj: Projected[] = new Array(nVerts);
  for (let i = 0; i < nVerts; i++) {
    proj[i] = camera.project([v[3 * i], v[3 * i + 1], v[3 * i + 2]]);
  }

  const t = geom.triangles;
  const nTris = t.length / 3;
  const order: { tri: number; depth: number; shade: number }[] = [];
  // light from the upper left of the camera
  for (let i = 0; i < nTris; i++) {
    const a = t[3 * i], b = t[3 * i + 1], c = t[3 * i + 2];
    const pa = proj[a], pb = proj[b], pc = proj[c];
    // screen-space backface cull (counter-clockwise outward winding)
    const area = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
    if (area >= 0) continue;
    const nx = normalOf(v, a, b, c);
    const shade = 0.45 + 0.55 * Math.max(0, nx[0] * -0.3 + nx[1] * -0.35 + nx[2] * 0.89);
    order.push({
      tri: i,
      depth: (pa.depth + pb.depth + pc.depth) / 3,
      shade,
    });
  }
  order.sort((p, q) => q.depth - p.depth);
  for (const { tri, depth: _d, shade } of order) {
    const a = proj[t[3 * tri]], b = proj[t[3 * tri + 1]], c = proj[t[3 * tri + 2]];
    ctx.fillStyle = faceColor(geom, tri, shade, overlays.patchGrid);
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(b.x, b.y);
    ctx.lineTo(c.x, c.y);
    ctx.closePath();
    ctx.fill();
    stats.trianglesDrawn += 1;
  }

  if (frame !== null) {
    stats.shaftDrawn = drawShaft(ctx, camera, frame, fulcrum);
    if (frame.dimple !== null) {
      drawDimple(ctx, camera, frame.dimple);
      stats.dimpleDrawn = true;
    }
    if (frame.sphere !== null && frame.sphere.center !== null) {
      drawSphere(ctx, camera, frame.sphere.center, frame.sphere.radius);
      stats.sphereDrawn = true;
    }
  }
  if (overlays.cones) {
    for (const cone of cones) {
      drawCone(ctx, camera, cone);
      stats.conesDrawn += 1;
    }
  }
  return stats;
}

function normalOf(v: Float64Array, a: number, b: number, c: number): Vec3 {
  const ax = v[3 * a], ay = v[3 * a + 1], az = v[3 * a + 2];
  const ux = v[3 * b] - ax, uy = v[3 * b + 1] - ay, uz = v[3 * b + 2] - az;
  const wx = v[3 * c] - ax, wy = v[3 * c + 1] - ay, wz = v[3 * c + 2] - az;
  const nx = uy * wz - uz * wy;
  const ny = uz * wx - ux * wz;
  const nz = ux * wy - uy * wx;
  const nn = Math.hypot(nx, ny, nz) || 1;
  return [nx / nn, ny / nn, nz / nn];
}

function drawShaft(ctx: Ctx2D, cam: Camera, frame: FramePayload,
                   fulcrum: Vec3 | null): boolean {
  if (fulcrum === null) return false;
  const tip = cam.project(frame.tip);
  const top = cam.project(fulcrum);
  ctx.strokeStyle = '#c8d2dc';
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(top.x, top.y);
  ctx.lineTo(tip.x, tip.y);
  ctx.stroke();
  ctx.lineWidth = 1;
  return true;
}

function drawDimple(ctx: Ctx2D, cam: Camera,
                    dimple: { center: Vec3; depth: number; radius: number }): void {
  const p = cam.project(dimple.center);
  const edge = cam.project([dimple.center[0] + dimple.radius,
                            dimple.center[1], dimple.center[2]]);
  const r = Math.max(2, Math.hypot(edge.x - p.x, edge.y - p.y));
  const g = ctx.createRadialGradient(p.x, p.y, 1, p.x, p.y, r);
  g.addColorStop(0, 'rgba(30, 12, 10, 0.55)');
  g.addColorStop(1, 'rgba(30, 12, 10, 0.0)');
  ctx.fillStyle = g;
  ctx.beginPath();
  ctx.arc(p.x, p.y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function drawSphere(ctx: Ctx2D, cam: Camera, center: Vec3, radius: number): void {
  const p = cam.project(center);
  const edge = cam.project([center[0] + radius, center[1], center[2]]);
  const r = Math.max(3, Math.hypot(edge.x - p.x, edge.y - p.y));
  ctx.fillStyle = 'rgba(122, 167, 217, 0.35)';
  ctx.strokeStyle = '#7aa7d9';
  ctx.beginPath();
  ctx.arc(p.x, p.y, r, 0, 2 * Math.PI);
  ctx.fill();
  ctx.stroke();
}

function drawCone(ctx: Ctx2D, cam: Camera, cone: ConePayload): void {
  const base = cam.project(cone.base);
  const apexWorld: Vec3 = [
    cone.base[0] - cone.axis[0] * cone.height,
    cone.base[1] - cone.axis[1] * cone.height,
    cone.base[2] - cone.axis[2] * cone.height,
  ];
  const apex = cam.project(apexWorld);
  const edge = cam.project([cone.base[0] + cone.radius, cone.base[1], cone.base[2]]);
  const r = Math.max(1.5, Math.hypot(edge.x - base.x, edge.y - base.y));
  ctx.fillStyle = 'rgba(230, 176, 68, 0.75)';
  ctx.strokeStyle = '#e6b044';
  // silhouette triangle plus base ellipse
  ctx.beginPath();
  ctx.moveTo(apex.x, apex.y);
  ctx.lineTo(base.x - r, base.y);
  ctx.lineTo(base.x + r, base.y);
  ctx.closePath();
  ctx.fill();
  ctx.beginPath();
  ctx.ellipse(base.x, base.y, r, r * 0.45, 0, 0, 2 * Math.PI);
  ctx.stroke();
}
