"""Palpation skill assessment.

Offline (or snapshot-copy) analysis of a tick stream: force-band gauge,
tap segmentation, constancy metrics with an expert/novice call, coverage
bookkeeping over the patch grid, force-map cone glyphs, and a stiffness
inversion that flags palpable lesions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .config import Config
from .haptics import HapticTick
from .tissue import TissueModel


class GaugeState(str, Enum):
    BELOW = "below"
    IN_BAND = "in_band"
    ABOVE = "above"


@dataclass(frozen=True)
class ForceBand:
    low: float
    high: float
    scenario: str = ""

    def __post_init__(self):
        if not 0.0 < self.low < self.high:
            raise ValueError("band must satisfy 0 < low < high")


def band_for_scenario(cfg: Config, scenario: str) -> ForceBand:
    return ForceBand(cfg.get(f"band.{scenario}.low"),
                     cfg.get(f"band.{scenario}.high"), scenario)


def gauge_state(force_magnitude: float, band: ForceBand) -> GaugeState:
    """Closed-interval band membership; exactly one state for any force."""
    if force_magnitude < band.low:
        return GaugeState.BELOW
    if force_magnitude > band.high:
        return GaugeState.ABOVE
    return GaugeState.IN_BAND


@dataclass(frozen=True)
class TapEpisode:
    t_start: int
    t_end: int
    t_peak: int
    peak_force: float
    contact_point: tuple[float, float, float]
    direction_at_peak: tuple[float, float, float]
    patch_id: int
    mean_tangential_speed: float
    penetration_at_peak: float
    rig: int = 0

    def to_obj(self) -> dict:
        return {
            "t_start": self.t_start, "t_end": self.t_end, "t_peak": self.t_peak,
            "peak_force": self.peak_force,
            "contact_point": list(self.contact_point),
            "direction_at_peak": list(self.direction_at_peak),
            "patch_id": self.patch_id,
            "mean_tangential_speed": self.mean_tangential_speed,
            "penetration_at_peak": self.penetration_at_peak,
            "rig": self.rig,
        }


def _tangential_speed(tick: HapticTick) -> float:
    fx, fy, fz = tick.force
    fm = math.sqrt(fx * fx + fy * fy + fz * fz)
    if fm <= 0.0:
        return 0.0
    nx, ny, nz = fx / fm, fy / fm, fz / fm
    vx, vy, vz = tick.tip_velocity
    vn = vx * nx + vy * ny + vz * nz
    tx, ty, tz = vx - vn * nx, vy - vn * ny, vz - vn * nz
    return math.sqrt(tx * tx + ty * ty + tz * tz)


def _episode_from_span(ticks: list[HapticTick], lo: int, hi: int,
                       rig: int) -> TapEpisode:
    span = ticks[lo:hi + 1]
    peak_i = lo
    peak = -1.0
    for i in range(lo, hi + 1):
        m = ticks[i].force_magnitude
        if m > peak:
            peak = m
            peak_i = i
    peak_tick = ticks[peak_i]
    speeds = [_tangential_speed(tk) for tk in span
              if tk.contact and tk.force_magnitude > 0.0]
    mean_speed = sum(speeds) / len(speeds) if speeds else 0.0
    return TapEpisode(
        t_start=span[0].t, t_end=span[-1].t, t_peak=peak_tick.t,
        peak_force=peak,
        contact_point=peak_tick.contact_point or peak_tick.tip,
        direction_at_peak=peak_tick.direction,
        patch_id=peak_tick.patch_id if peak_tick.patch_id is not None else -1,
        mean_tangential_speed=mean_speed,
        penetration_at_peak=peak_tick.penetration, rig=rig)


def segment_taps(ticks: list[HapticTick], threshold: float = 0.3,
                 min_gap: int = 50) -> list[TapEpisode]:
    """Maximal supra-threshold runs of |force|, with short-gap merging.

    Two runs merge when fewer than ``min_gap`` milliseconds of sub-threshold
    samples separate them (endpoints within ``min_gap`` ms).  Multi-rig
    streams are segmented per rig and concatenated by start time.
    """
    rigs = sorted({tk.rig for tk in ticks})
    episodes: list[TapEpisode] = []
    for rig in rigs:
        rt = [tk for tk in ticks if tk.rig == rig]
        for a, b in zip(rt, rt[1:]):
            if b.t <= a.t:
                raise ValueError("tick stream must be time-ordered")
        runs: list[list[int]] = []
        open_lo: int | None = None
        for i, tk in enumerate(rt):
            if tk.force_magnitude > threshold:
                if open_lo is None:
                    open_lo = i
                hi = i
            elif open_lo is not None:
                runs.append([open_lo, hi])
                open_lo = None
        if open_lo is not None:
            runs.append([open_lo, hi])
        merged: list[list[int]] = []
        for run in runs:
            if merged and rt[run[0]].t - rt[merged[-1][1]].t <= min_gap:
                merged[-1][1] = run[1]
            else:
                merged.append(run)
        episodes.extend(_episode_from_span(rt, lo, hi, rig)
                        for lo, hi in merged)
    episodes.sort(key=lambda e: (e.t_start, e.rig))
    return episodes


@dataclass(frozen=True)
class PalpationMetrics:
    tap_count: int
    mean_peak_force: float
    peak_force_cv: float | None     # absent below two taps
    speed_cv: float | None
    in_band_fraction: float
    coverage_fraction: float

    def to_obj(self) -> dict:
        return {
            "tap_count": self.tap_count,
            "mean_peak_force": self.mean_peak_force,
            "peak_force_cv": self.peak_force_cv,
            "speed_cv": self.speed_cv,
            "in_band_fraction": self.in_band_fraction,
            "coverage_fraction": self.coverage_fraction,
        }


def _population_cv(values: list[float]) -> float | None:
    if len(values) < 2:
        return None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    std = math.sqrt(var)
    if mean <= 1e-12:
        return 0.0 if std <= 1e-12 else None
    return std / mean


def compute_metrics(episodes: list[TapEpisode], band: ForceBand,
                    palpable_patch_count: int) -> PalpationMetrics:
    n = len(episodes)
    peaks = [e.peak_force for e in episodes]
    in_band = [e for e in episodes
               if gauge_state(e.peak_force, band) is GaugeState.IN_BAND]
    covered = {e.patch_id for e in in_band if e.patch_id >= 0}
    return PalpationMetrics(
        tap_count=n,
        mean_peak_force=sum(peaks) / n if n else 0.0,
        peak_force_cv=_population_cv(peaks),
        speed_cv=_population_cv([e.mean_tangential_speed for e in episodes]),
        in_band_fraction=len(in_band) / n if n else 0.0,
        coverage_fraction=len(covered) / palpable_patch_count
        if palpable_patch_count else 0.0,
    )


class SkillClass(str, Enum):
    EXPERT = "expert"
    NOVICE = "novice"
    UNRATED = "unrated"


@dataclass(frozen=True)
class ClassifyThresholds:
    peak_cv_max: float = 0.15
    speed_cv_max: float = 0.20
    in_band_min: float = 0.8

    @classmethod
    def from_config(cls, cfg: Config) -> "ClassifyThresholds":
        return cls(cfg.get("classify.peak_cv_max"),
                   cfg.get("classify.speed_cv_max"),
                   cfg.get("classify.in_band_min"))


def classify(metrics: PalpationMetrics,
             thresholds: ClassifyThresholds | None = None) -> SkillClass:
    """Expert requires constancy on both CVs plus in-band discipline.

    Monotone by construction: lowering either CV or raising the in-band
    fraction can only move toward (never away from) Expert.
    """
    th = thresholds or ClassifyThresholds()
    if metrics.tap_count < 2 or metrics.peak_force_cv is None \
            or metrics.speed_cv is None:
        return SkillClass.UNRATED
    if (metrics.peak_force_cv <= th.peak_cv_max
            and metrics.speed_cv <= th.speed_cv_max
            and metrics.in_band_fraction >= th.in_band_min):
        return SkillClass.EXPERT
    return SkillClass.NOVICE


@dataclass(frozen=True)
class ConeGlyph:
    base: tuple[float, float, float]
    axis: tuple[float, float, float]
    height: float
    radius: float

    def to_obj(self) -> dict:
        return {"base": list(self.base), "axis": list(self.axis),
                "height": self.height, "radius": self.radius}


def cone_glyphs(episodes: list[TapEpisode], height_per_newton: float = 6.0,
                radius_per_newton: float = 2.5) -> list[ConeGlyph]:
    """One force-map cone per tap, sized proportionally to peak force."""
    if height_per_newton <= 0 or radius_per_newton <= 0:
        raise ValueError("cone scale constants must be positive")
    return [ConeGlyph(e.contact_point, e.direction_at_peak,
                      height_per_newton * e.peak_force,
                      radius_per_newton * e.peak_force)
            for e in episodes]


def estimated_stiffness(episode: TapEpisode) -> float | None:
    """Spring-law inversion at the peak; None when penetration is zero."""
    if episode.penetration_at_peak <= 0.0:
        return None
    return episode.peak_force * 1000.0 / episode.penetration_at_peak


def anomalous_episodes(episodes: list[TapEpisode], model: TissueModel,
                       deviation: float = 0.2) -> list[dict]:
    """Episodes whose estimated stiffness departs from the lesion-free floor."""
    baseline = model.baseline_stiffness
    out = []
    for i, e in enumerate(episodes):
        est = estimated_stiffness(e)
        if est is None:
            continue
        if abs(est - baseline) > deviation * baseline:
            out.append({"episode": i, "estimated_k": est,
                        "baseline_k": baseline,
                        "relative_deviation": abs(est - baseline) / baseline})
    return out


def lesion_report(episodes: list[TapEpisode], model: TissueModel,
                  deviation: float = 0.2,
                  radius_sigmas: float = 1.5) -> list[dict]:
    """Per-feature detection: a nearby episode with anomalous stiffness.

    An episode counts toward a feature when its contact point lies within
    ``radius_sigmas`` of the feature center and its spring-law stiffness
    estimate deviates from the lesion-free baseline by more than
    ``deviation`` (relative).
    """
    baseline = model.baseline_stiffness
    rows = []
    for f in model.features:
        best_est: float | None = None
        best_dev = 0.0
        detected = False
        for e in episodes:
            est = estimated_stiffness(e)
            if est is None:
                continue
            if math.dist(e.contact_point, f.center) > radius_sigmas * f.radius_sigma:
                continue
            dev = abs(est - baseline) / baseline
            if best_est is None or dev > best_dev:
                best_est, best_dev = est, dev
            if dev > deviation:
                detected = True
        rows.append({
            "kind": f.kind.value,
            "center": list(f.center),
            "radius_sigma": f.radius_sigma,
            "visible": f.visible,
            "detected": detected,
            "estimated_k": best_est,
        })
    return rows


def explore_phase_ticks(ticks: list[HapticTick],
                        events: list[dict] | None) -> list[HapticTick]:
    """Drop warm-up ticks: assessment starts at the explore transition."""
    if not events:
        return ticks
    start = None
    for e in events:
        if e.get("kind") == "phase" and e.get("payload", {}).get("phase") == "explore":
            start = int(e["t"])
            break
    if start is None:
        return ticks
    return [tk for tk in ticks if tk.t >= start]


REPORT_SCHEMA = "palpreport/1"

CSV_HEADER = ("index,t_start_ms,t_end_ms,t_peak_ms,peak_force_n,patch_id,"
              "contact_x_mm,contact_y_mm,contact_z_mm,axis_x,axis_y,axis_z,"
              "mean_tangential_speed_mm_s,penetration_at_peak_mm,in_band")


def episodes_csv(episodes: list[TapEpisode], band: ForceBand) -> str:
    lines = [CSV_HEADER]
    for i, e in enumerate(episodes):
        in_band = gauge_state(e.peak_force, band) is GaugeState.IN_BAND
        lines.append(
            f"{i},{e.t_start},{e.t_end},{e.t_peak},{e.peak_force!r},"
            f"{e.patch_id},{e.contact_point[0]!r},{e.contact_point[1]!r},"
            f"{e.contact_point[2]!r},{e.direction_at_peak[0]!r},"
            f"{e.direction_at_peak[1]!r},{e.direction_at_peak[2]!r},"
            f"{e.mean_tangential_speed!r},{e.penetration_at_peak!r},"
            f"{int(in_band)}")
    return "\n".join(lines) + "\n"


def build_report(ticks: list[HapticTick], model: TissueModel, cfg: Config,
                 band: ForceBand | None = None,
                 events: list[dict] | None = None) -> dict:
    """Full assessment document for one recorded session."""
    band = band or band_for_scenario(cfg, model.scenario.value)
    ticks = explore_phase_ticks(ticks, events)
    episodes = segment_taps(ticks, cfg.get("assess.tap_threshold"),
                            cfg.get_int("assess.min_gap"))
    metrics = compute_metrics(episodes, band, model.palpable_patch_count)
    skill = classify(metrics, ClassifyThresholds.from_config(cfg))
    cones = cone_glyphs(episodes, cfg.get("cones.height_per_newton"),
                        cfg.get("cones.radius_per_newton"))
    lesions = lesion_report(episodes, model, cfg.get("lesion.deviation"),
                            cfg.get("lesion.radius_sigmas"))
    report = {
        "schema": REPORT_SCHEMA,
        "scenario": model.scenario.value,
        "seed": model.seed,
        "band": {"low": band.low, "high": band.high},
        "metrics": metrics.to_obj(),
        "classification": skill.value,
        "episodes": [e.to_obj() for e in episodes],
        "cones": [c.to_obj() for c in cones],
        "lesions": lesions,
        "anomalies": anomalous_episodes(episodes, model,
                                        cfg.get("lesion.deviation")),
    }
    if events is not None:
        answers = [e for e in events if e.get("kind") == "answer"]
        report["quiz"] = {
            "answered": len(answers),
            "correct": sum(1 for a in answers if a["payload"].get("correct")),
            "score": answers[-1]["payload"].get("score") if answers else None,
        }
    return report
