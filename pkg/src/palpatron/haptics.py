"""Trocar-constrained instrument servo.

The instrument pivots about a fixed fulcrum point (the trocar entry): two
tilt angles plus shaft insertion place a spherical tool tip; lateral handle
motion therefore inverts at the tip.  A fixed 1 ms step rate-limits the
commanded state, resolves tip contact against the tissue shell, and renders
a spring-damper reaction force.  Everything here is pure scalar float math,
deterministic for a given model and target stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .config import Config, ConfigError
from .tissue import TissueModel

DT_MS = 1.0  # servo step, fixed
ANGLE_CLAMP = math.pi / 3.0  # workspace half-cone for yaw and pitch


class Instrument(str, Enum):
    MARYLAND = "maryland"
    BABCOCK = "babcock"


@dataclass
class RigState:
    """Commanded/actual pose through the trocar."""

    yaw: float = 0.0        # rad
    pitch: float = 0.0      # rad
    insertion: float = 0.0  # mm along the shaft past the fulcrum
    roll: float = 0.0       # rad
    grip: float = 0.0       # 0 open .. 1 closed

    def as_dict(self) -> dict[str, float]:
        return {"yaw": self.yaw, "pitch": self.pitch,
                "insertion": self.insertion, "roll": self.roll,
                "grip": self.grip}

    @classmethod
    def from_dict(cls, d: dict) -> "RigState":
        return cls(float(d.get("yaw", 0.0)), float(d.get("pitch", 0.0)),
                   float(d.get("insertion", 0.0)), float(d.get("roll", 0.0)),
                   float(d.get("grip", 0.0)))

    def finite(self) -> bool:
        return all(math.isfinite(v) for v in
                   (self.yaw, self.pitch, self.insertion, self.roll, self.grip))


@dataclass
class FulcrumRig:
    fulcrum: tuple[float, float, float]
    tool_length: float
    instrument: Instrument
    tip_radius: float
    state: RigState = field(default_factory=RigState)
    prev_tip: tuple[float, float, float] | None = None

    def clamp(self, s: RigState) -> RigState:
        return RigState(
            yaw=min(max(s.yaw, -ANGLE_CLAMP), ANGLE_CLAMP),
            pitch=min(max(s.pitch, -ANGLE_CLAMP), ANGLE_CLAMP),
            insertion=min(max(s.insertion, 0.0), self.tool_length),
            roll=s.roll,
            grip=min(max(s.grip, 0.0), 1.0),
        )


def make_rig(cfg: Config, instrument: Instrument | None = None) -> FulcrumRig:
    if instrument is None:
        instrument = (Instrument.BABCOCK if cfg.get_int("rig.instrument") == 1
                      else Instrument.MARYLAND)
    if not cfg.get("rig.tip_radius_babcock") > cfg.get("rig.tip_radius_maryland"):
        raise ConfigError("babcock tip radius must exceed the maryland one")
    radius = cfg.get(f"rig.tip_radius_{instrument.value}")
    rig = FulcrumRig(
        fulcrum=(cfg.get("rig.fulcrum_x"), cfg.get("rig.fulcrum_y"),
                 cfg.get("rig.fulcrum_z")),
        tool_length=cfg.get("rig.tool_length"),
        instrument=instrument,
        tip_radius=radius,
        state=RigState(insertion=cfg.get("rig.initial_insertion")),
    )
    rig.prev_tip = tip_pose(rig)[0]
    return rig


def tip_pose(rig: FulcrumRig) -> tuple[tuple[float, float, float],
                                       tuple[float, float, float]]:
    """Tip point and unit shaft direction (fulcrum toward tip).

    Zero yaw/pitch points the shaft straight down; positive yaw swings the
    tip toward -x (the handle above the fulcrum goes +x).
    """
    s = rig.state
    cp = math.cos(s.pitch)
    dx = -cp * math.sin(s.yaw)
    dy = math.sin(s.pitch)
    dz = -cp * math.cos(s.yaw)
    f = rig.fulcrum
    ins = s.insertion
    return (f[0] + ins * dx, f[1] + ins * dy, f[2] + ins * dz), (dx, dy, dz)


def handle_point(rig: FulcrumRig) -> tuple[float, float, float]:
    """Proximal shaft end (above the fulcrum, opposite the tip)."""
    (tx, ty, tz), (dx, dy, dz) = tip_pose(rig)
    above = rig.tool_length - rig.state.insertion
    f = rig.fulcrum
    return (f[0] - above * dx, f[1] - above * dy, f[2] - above * dz)


def contact_force(penetration_mm: float, stiffness: float,
                  normal_velocity_mm_s: float, damping: float,
                  clamp: float) -> float:
    """Reaction magnitude along the outward normal.

    Spring on penetration (mm -> m) plus a damper on the outward normal
    velocity; never adhesive, saturates at ``clamp`` newtons.
    """
    f = stiffness * (penetration_mm / 1000.0) - damping * (normal_velocity_mm_s / 1000.0)
    if f < 0.0:
        return 0.0
    return f if f < clamp else clamp


@dataclass(frozen=True)
class HapticTick:
    t: int                                  # ms since session start
    rig: int                                # rig index (two-instrument mode)
    tip: tuple[float, float, float]         # mm
    tip_velocity: tuple[float, float, float]  # mm/s
    direction: tuple[float, float, float]   # unit shaft axis
    force: tuple[float, float, float]       # N, reaction on the tool
    contact: bool
    penetration: float                      # mm, 0 when out of contact
    contact_point: tuple[float, float, float] | None = None
    patch_id: int | None = None

    @property
    def force_magnitude(self) -> float:
        fx, fy, fz = self.force
        return math.sqrt(fx * fx + fy * fy + fz * fz)


@dataclass(frozen=True)
class ServoParams:
    force_clamp: float = 4.0
    rate_angular: float = 2.0      # rad/s
    rate_insertion: float = 200.0  # mm/s
    rate_grip: float = 5.0         # 1/s
    dimple_scale: float = 6.0
    dimple_cap: float = 25.0

    @classmethod
    def from_config(cls, cfg: Config) -> "ServoParams":
        return cls(cfg.get("servo.force_clamp"), cfg.get("rig.rate_angular"),
                   cfg.get("rig.rate_insertion"), cfg.get("rig.rate_grip"),
                   cfg.get("servo.dimple_scale"), cfg.get("servo.dimple_cap"))


def _approach(current: float, target: float, max_step: float) -> float:
    delta = target - current
    if delta > max_step:
        return current + max_step
    if delta < -max_step:
        return current - max_step
    return target


def servo_step(model: TissueModel, rig: FulcrumRig, target: RigState,
               params: ServoParams, t_ms: int, rig_index: int = 0) -> HapticTick:
    """Advance one 1 ms step toward ``target`` and resolve tip contact.

    Mutates ``rig`` in place (state and previous-tip cache) and returns the
    tick record.  The commanded target must be finite; reject upstream.
    """
    target = rig.clamp(target)
    s = rig.state
    ang = params.rate_angular * DT_MS / 1000.0
    s.yaw = _approach(s.yaw, target.yaw, ang)
    s.pitch = _approach(s.pitch, target.pitch, ang)
    s.roll = _approach(s.roll, target.roll, ang)
    s.insertion = _approach(s.insertion, target.insertion,
                            params.rate_insertion * DT_MS / 1000.0)
    s.grip = _approach(s.grip, target.grip, params.rate_grip * DT_MS / 1000.0)

    tip, direction = tip_pose(rig)
    prev = rig.prev_tip if rig.prev_tip is not None else tip
    inv_dt_s = 1000.0 / DT_MS
    vel = ((tip[0] - prev[0]) * inv_dt_s, (tip[1] - prev[1]) * inv_dt_s,
           (tip[2] - prev[2]) * inv_dt_s)
    rig.prev_tip = tip

    q = model.surface_query(tip[0], tip[1], tip[2])
    penetration = rig.tip_radius - q.signed_distance
    if penetration > 0.0:
        n = q.normal
        v_n = vel[0] * n[0] + vel[1] * n[1] + vel[2] * n[2]
        k = model.stiffness_at(q.nearest_point)
        f = contact_force(penetration, k, v_n, model.damping_b,
                          params.force_clamp)
        return HapticTick(t_ms, rig_index, tip, vel, direction,
                          (f * n[0], f * n[1], f * n[2]), True, penetration,
                          q.nearest_point, q.patch_id)
    return HapticTick(t_ms, rig_index, tip, vel, direction, (0.0, 0.0, 0.0),
                      False, 0.0)


def display_dimple(tick: HapticTick, params: ServoParams) -> dict | None:
    """Purely visual contact dent; never feeds back into the force."""
    if not tick.contact or tick.penetration <= 0.0:
        return None
    radius = params.dimple_scale * tick.penetration
    if radius > params.dimple_cap:
        radius = params.dimple_cap
    return {"center": tick.contact_point, "depth": tick.penetration,
            "radius": radius}


@dataclass(frozen=True)
class InputSample:
    t: int  # ms
    state: RigState
    rig: int = 0


def run_servo(model: TissueModel, rig: FulcrumRig,
              samples: Iterable[InputSample], duration_ms: int,
              params: ServoParams | None = None) -> Iterator[HapticTick]:
    """Step the servo for ``duration_ms`` virtual milliseconds.

    Targets come from time-stamped samples under zero-order hold: each tick
    uses the most recent sample at or before its own time; an exhausted
    stream simply holds the last target.  Yields exactly ``duration_ms``
    ticks at t = 1 .. duration.
    """
    params = params or ServoParams()
    it = iter(samples)
    pending: InputSample | None = next(it, None)
    target = RigState(**rig.state.as_dict())
    for t in range(1, int(duration_ms) + 1):
        while pending is not None and pending.t <= t:
            if pending.state.finite():
                target = pending.state
            pending = next(it, None)
        yield servo_step(model, rig, target, params, t)
