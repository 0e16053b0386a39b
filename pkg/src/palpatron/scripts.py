"""Input-script generators: coverage sweeps, presses, jitter synthesis.

These produce the time-stamped target-state streams that drive scripted
sessions: a full-surface palpation sweep tuned to land inside the force
band, single presses, synthetic trainee sessions with controllable jitter
(the classifier calibration harness), and a familiarization chase recorded
from a dry run.  Press segments emit one sample per millisecond so the tip
velocity is script-controlled rather than slew-rate-limited.
"""

from __future__ import annotations

import math

import numpy as np

from .config import Config
from .haptics import (ANGLE_CLAMP, InputSample, RigState, ServoParams,
                      make_rig, servo_step)
from .session import Session
from .tissue import TissueModel


class ScriptGenError(ValueError):
    """Requested trajectory leaves the instrument workspace."""


def ik_state(fulcrum: tuple[float, float, float],
             tip: tuple[float, float, float],
             grip: float = 0.0) -> RigState:
    """Instrument state whose tip lands on ``tip`` (fulcrum inversion)."""
    dx = tip[0] - fulcrum[0]
    dy = tip[1] - fulcrum[1]
    dz = tip[2] - fulcrum[2]
    ins = math.sqrt(dx * dx + dy * dy + dz * dz)
    if ins < 1e-9:
        return RigState(insertion=0.0, grip=grip)
    ux, uy, uz = dx / ins, dy / ins, dz / ins
    pitch = math.asin(max(-1.0, min(1.0, uy)))
    yaw = math.atan2(-ux, -uz)
    if abs(yaw) > ANGLE_CLAMP or abs(pitch) > ANGLE_CLAMP:
        raise ScriptGenError(f"tip {tip} outside the workspace cone")
    return RigState(yaw=yaw, pitch=pitch, insertion=ins, grip=grip)


class ScriptBuilder:
    """Accumulates strictly increasing input samples for one rig."""

    def __init__(self, cfg: Config, start: RigState, rig: int = 0):
        self.rate_angular = cfg.get("rig.rate_angular")
        self.rate_insertion = cfg.get("rig.rate_insertion")
        self.rig = rig
        self.t = 0
        self.current = start
        self.last_tip: tuple[float, float, float] | None = None
        self.samples: list[InputSample] = []

    def _emit(self, state: RigState) -> None:
        self.samples.append(InputSample(self.t, state, self.rig))
        self.current = state

    def _slew_ms(self, a: RigState, b: RigState) -> int:
        ang = max(abs(b.yaw - a.yaw), abs(b.pitch - a.pitch),
                  abs(b.roll - a.roll)) / self.rate_angular
        ins = abs(b.insertion - a.insertion) / self.rate_insertion
        return int(math.ceil(max(ang, ins) * 1000.0))

    def slew_to(self, state: RigState, margin_ms: int = 12) -> None:
        """Issue a single target, then wait out the servo's slew time.

        The next builder op starts only after the rig has arrived, so glide
        segments always begin from their assumed start state.
        """
        duration = self._slew_ms(self.current, state)
        self.t += 1
        self._emit(state)
        self.t += duration + margin_ms

    def glide_to(self, state: RigState, duration_ms: int) -> None:
        """Per-millisecond interpolation: velocity set by the script."""
        duration_ms = max(duration_ms, self._slew_ms(self.current, state) + 1)
        a, b = self.current, state
        for i in range(1, duration_ms + 1):
            f = i / duration_ms
            self.t += 1
            self._emit(RigState(
                yaw=a.yaw + f * (b.yaw - a.yaw),
                pitch=a.pitch + f * (b.pitch - a.pitch),
                insertion=a.insertion + f * (b.insertion - a.insertion),
                roll=a.roll + f * (b.roll - a.roll),
                grip=a.grip + f * (b.grip - a.grip)))

    def hold(self, ms: int) -> None:
        self.t += ms
        self._emit(self.current)


def _tangent_at(normal: tuple[float, float, float]) -> tuple[float, float, float]:
    nx, ny, nz = normal
    # project +x onto the tangent plane; fall back to +y near the x pole
    tx, ty, tz = 1.0 - nx * nx, -nx * ny, -nx * nz
    n = math.sqrt(tx * tx + ty * ty + tz * tz)
    if n < 1e-6:
        tx, ty, tz = -ny * nx, 1.0 - ny * ny, -ny * nz
        n = math.sqrt(tx * tx + ty * ty + tz * tz)
    return tx / n, ty / n, tz / n


def _offset(p, n, d):
    return (p[0] + d * n[0], p[1] + d * n[1], p[2] + d * n[2])


def _tip_radius(cfg: Config) -> float:
    name = "babcock" if cfg.get_int("rig.instrument") == 1 else "maryland"
    return cfg.get(f"rig.tip_radius_{name}")


def _fulcrum(cfg: Config) -> tuple[float, float, float]:
    return (cfg.get("rig.fulcrum_x"), cfg.get("rig.fulcrum_y"),
            cfg.get("rig.fulcrum_z"))


def press_cycle(builder: ScriptBuilder, model: TissueModel, cfg: Config,
                point, *, force_target: float = 2.25,
                approach_mm_s: float = 70.0, hold_ms: int = 40,
                drift_mm_s: float = 30.0, clearance_mm: float = 8.0) -> None:
    """Hover, press to a force target, drift briefly, lift off.

    The press depth is set from the local stiffness so the peak lands near
    ``force_target`` regardless of lesions under the contact point.
    """
    sq = model.surface_query(point[0], point[1], point[2])
    p, n = sq.nearest_point, sq.normal
    rig_radius = _tip_radius(cfg)
    k = model.stiffness_at(p)
    pen = force_target * 1000.0 / k
    fulcrum = _fulcrum(cfg)

    hover_tip = _offset(p, n, rig_radius + clearance_mm)
    hover = ik_state(fulcrum, hover_tip)
    press = ik_state(fulcrum, _offset(p, n, rig_radius - pen))
    tvec = _tangent_at(n)
    drift_mm = drift_mm_s * hold_ms / 1000.0
    pressed = _offset(p, n, rig_radius - pen)
    drifted = ik_state(fulcrum, (pressed[0] + drift_mm * tvec[0],
                                 pressed[1] + drift_mm * tvec[1],
                                 pressed[2] + drift_mm * tvec[2]))

    # transit hover-to-hover as coordinated glides along the dome: long
    # straight chords would cut through the convex shell, so hops are kept
    # short and re-projected to hover height over the surface
    if builder.last_tip is None:
        builder.slew_to(hover)
    else:
        chord = math.dist(builder.last_tip, hover_tip)
        hops = max(1, int(math.ceil(chord / 18.0)))
        start_tip = builder.last_tip
        for h in range(1, hops):
            f = h / hops
            mid = (start_tip[0] + f * (hover_tip[0] - start_tip[0]),
                   start_tip[1] + f * (hover_tip[1] - start_tip[1]),
                   start_tip[2] + f * (hover_tip[2] - start_tip[2]))
            mq = model.surface_query(*mid)
            lift = _offset(mq.nearest_point, mq.normal,
                           rig_radius + clearance_mm)
            builder.glide_to(ik_state(fulcrum, lift),
                             int(math.ceil(chord / hops / 180.0 * 1000.0)) + 8)
        builder.glide_to(hover,
                         int(math.ceil(chord / hops / 180.0 * 1000.0)) + 8)
    descend = clearance_mm + pen
    builder.glide_to(press, int(math.ceil(descend / approach_mm_s * 1000.0)))
    builder.glide_to(drifted, hold_ms)
    builder.glide_to(hover, int(math.ceil(descend / (approach_mm_s * 1.6) * 1000.0)))
    builder.last_tip = hover_tip


def serpentine_patch_order(model: TissueModel,
                           grid_u: int = 20) -> list[tuple[int, np.ndarray]]:
    """Patch centroids row by row, alternating direction for short hops."""
    centroids = dict(model.patch_centroids())
    rows: dict[int, list[int]] = {}
    for pid in sorted(centroids):
        rows.setdefault(pid // grid_u, []).append(pid)
    ordered: list[tuple[int, np.ndarray]] = []
    for r in sorted(rows):
        cols = rows[r][::-1] if r % 2 else rows[r]
        ordered.extend((pid, centroids[pid]) for pid in cols)
    return ordered


def sweep_script(model: TissueModel, cfg: Config, *,
                 force_target: float = 2.25, approach_mm_s: float = 70.0,
                 hold_ms: int = 40, patch_ids: list[int] | None = None,
                 tail_ms: int = 80) -> list[InputSample]:
    """Press once at every patch centroid (serpentine order)."""
    builder = ScriptBuilder(cfg, RigState(insertion=cfg.get("rig.initial_insertion")))
    order = serpentine_patch_order(model, cfg.get_int("mesh.patch_grid_u"))
    if patch_ids is not None:
        wanted = set(patch_ids)
        order = [(pid, c) for pid, c in order if pid in wanted]
    for _pid, centroid in order:
        press_cycle(builder, model, cfg, centroid, force_target=force_target,
                    approach_mm_s=approach_mm_s, hold_ms=hold_ms)
    builder.hold(tail_ms)
    return builder.samples


def single_press_script(model: TissueModel, cfg: Config, patch_id: int,
                        **kwargs) -> list[InputSample]:
    return sweep_script(model, cfg, patch_ids=[patch_id], **kwargs)


def quasi_static_press_script(model: TissueModel, cfg: Config, point,
                              depth_mm: float, speed_mm_s: float = 10.0,
                              settle_ms: int = 150) -> list[InputSample]:
    """Slow symmetric press/release to a fixed geometric depth."""
    sq = model.surface_query(point[0], point[1], point[2])
    p, n = sq.nearest_point, sq.normal
    radius = _tip_radius(cfg)
    fulcrum = _fulcrum(cfg)
    clearance = 8.0
    hover = ik_state(fulcrum, _offset(p, n, radius + clearance))
    press = ik_state(fulcrum, _offset(p, n, radius - depth_mm))
    travel_ms = int(math.ceil((clearance + depth_mm) / speed_mm_s * 1000.0))
    builder = ScriptBuilder(cfg, RigState(insertion=cfg.get("rig.initial_insertion")))
    builder.slew_to(hover)
    builder.hold(settle_ms)
    builder.glide_to(press, travel_ms)
    builder.hold(settle_ms)
    builder.glide_to(hover, travel_ms)
    builder.hold(settle_ms)
    return builder.samples


DEFAULT_JITTER_PATCHES = [42, 47, 52, 57, 97, 92, 87, 82, 122, 127, 132, 137]


def jitter_script(model: TissueModel, cfg: Config, jitter: float, *,
                  taps: int = 12, seed: int = 1234,
                  force_target: float = 2.25, approach_mm_s: float = 30.0,
                  hold_ms: int = 80) -> list[InputSample]:
    """Synthetic trainee: per-tap force/speed/drift scaled by ``jitter``.

    The normalized draws are fixed by ``seed`` and scaled by the jitter
    level, so sweeping the level moves every constancy metric montonically
    and the expert/novice call flips exactly once.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(taps)
    w = rng.standard_normal(taps)
    u = rng.standard_normal(taps)
    centroids = dict(model.patch_centroids())
    pids = [DEFAULT_JITTER_PATCHES[i % len(DEFAULT_JITTER_PATCHES)]
            for i in range(taps)]
    builder = ScriptBuilder(cfg, RigState(insertion=cfg.get("rig.initial_insertion")))
    for i in range(taps):
        force = min(max(force_target * (1.0 + jitter * z[i]), 0.9), 3.6)
        speed = min(max(approach_mm_s * (1.0 + jitter * w[i]), 8.0), 120.0)
        drift = min(max(30.0 * (1.0 + jitter * u[i]), 2.0), 90.0)
        press_cycle(builder, model, cfg, centroids[pids[i]],
                    force_target=force, approach_mm_s=speed, hold_ms=hold_ms,
                    drift_mm_s=drift)
    builder.hold(80)
    return builder.samples


def familiarization_script(model: TissueModel, cfg: Config, seed: int,
                           max_ms: int = 25_000) -> list[InputSample]:
    """Sphere-chasing input stream recorded from a closed-loop dry run.

    The dry run mirrors the scripted runner exactly (a sample stamped t is
    applied before stepping tick t), so re-running the recorded script
    reproduces the same tip path, the same seeded sphere placements, and
    the same touch ticks; the recorded familiarization passes.
    """
    session = Session(model, cfg, seed, lambda *_: None)
    if session.familiarization is None:
        return []
    rig = make_rig(cfg)
    params = ServoParams.from_config(cfg)
    fulcrum = rig.fulcrum
    samples: list[InputSample] = []
    target = RigState(**rig.state.as_dict())
    session.begin(0)
    for t in range(1, max_ms + 1):
        center = session.familiarization.current_center
        if center is not None:
            desired = ik_state(fulcrum, center)
            if desired != target:
                target = desired
                samples.append(InputSample(t, target, 0))
        tick = servo_step(model, rig, target, params, t)
        session.on_tick(tick)
        if session.familiarization.passed:
            samples.append(InputSample(t + 1, target, 0))  # marks the end time
            break
    return samples
