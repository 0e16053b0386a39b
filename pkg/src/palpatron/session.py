"""Training-session state machine.

A session walks Familiarize -> Explore -> Quiz -> Report.  Familiarization
asks the trainee to touch a randomly placed sphere a fixed number of times
inside a time limit (with unlimited retries); the quiz asks one question per
tissue attribute and grades against the scenario's ground truth.  All
randomness comes from the session's seeded stream, so a scripted session is
fully reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable

import numpy as np

from .config import Config
from .haptics import ANGLE_CLAMP, HapticTick
from .tissue import Scenario, TissueModel, derive_attributes


class Phase(str, Enum):
    FAMILIARIZE = "familiarize"
    EXPLORE = "explore"
    QUIZ = "quiz"
    REPORT = "report"


PHASE_ORDER = [Phase.FAMILIARIZE, Phase.EXPLORE, Phase.QUIZ, Phase.REPORT]


class SessionError(Exception):
    """Command rejected by the session machine."""

    code = "session_error"


class WrongPhaseError(SessionError):
    code = "wrong_phase"


class UnknownItemError(SessionError):
    code = "unknown_item"


class RepeatedAnswerError(SessionError):
    code = "repeated_answer"


def session_rng(seed: int) -> np.random.Generator:
    """Session-events stream: child 1 of the root seed (tissue takes 0)."""
    root = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.PCG64(root.spawn(2)[1]))


def make_sphere_sampler(model: TissueModel, cfg: Config,
                        clearance_mm: float = 15.0) -> Callable:
    """Placement sampler restricted to the instrument's reachable cone.

    Samples instrument states inside the yaw/pitch clamps and keeps tip
    positions with free clearance above the shell, so every placed sphere
    is reachable by construction.
    """
    fx, fy, fz = (cfg.get("rig.fulcrum_x"), cfg.get("rig.fulcrum_y"),
                  cfg.get("rig.fulcrum_z"))
    tool_length = cfg.get("rig.tool_length")
    radius = cfg.get("session.sphere_radius")

    def sample(rng: np.random.Generator, away_from=None) -> tuple[float, float, float]:
        for _ in range(256):
            yaw = float(rng.uniform(-0.9 * ANGLE_CLAMP, 0.9 * ANGLE_CLAMP))
            pitch = float(rng.uniform(-0.9 * ANGLE_CLAMP, 0.9 * ANGLE_CLAMP))
            ins = float(rng.uniform(0.25, 0.85)) * tool_length
            cp = math.cos(pitch)
            tip = (fx - ins * cp * math.sin(yaw),
                   fy + ins * math.sin(pitch),
                   fz - ins * cp * math.cos(yaw))
            if model.surface_query(*tip).signed_distance < clearance_mm:
                continue
            if away_from is not None:
                d = math.dist(tip, away_from)
                if d < 3.0 * radius:
                    continue
            return tip
        return tip  # practically unreachable; workspace is mostly free space

    return sample


@dataclass
class FamiliarizationTask:
    """Touch-the-sphere warm-up; rising-edge touch detection."""

    sphere_radius: float = 10.0
    required_touches: int = 5
    time_limit_ms: int = 30_000
    attempt: int = 1
    touches_done: int = 0
    current_center: tuple[float, float, float] | None = None
    deadline_ms: int | None = None
    _armed: bool = field(default=False, repr=False)  # been outside since placement

    def place(self, rng, sampler, t_ms: int, tip=None) -> dict:
        self.current_center = sampler(rng, away_from=tip)
        self._armed = False
        return {"center": list(self.current_center), "attempt": self.attempt,
                "touches_done": self.touches_done}

    def step(self, tick: HapticTick, rng, sampler) -> list[tuple[str, dict]]:
        """Advance with one servo tick; returns (kind, payload) events."""
        events: list[tuple[str, dict]] = []
        if self.passed:
            return events
        t = tick.t
        if self.deadline_ms is None:
            # ticks start at t=1; the clock runs from session start (t=0)
            self.deadline_ms = (t - 1) + self.time_limit_ms
        if self.current_center is None:
            events.append(("sphere", self.place(rng, sampler, t, tick.tip)))

        if t >= self.deadline_ms:
            self.attempt += 1
            self.touches_done = 0
            self.deadline_ms = t + self.time_limit_ms
            events.append(("familiarization", {
                "result": "timeout", "attempt": self.attempt}))
            events.append(("sphere", self.place(rng, sampler, t, tick.tip)))
            return events

        inside = math.dist(tick.tip, self.current_center) <= self.sphere_radius
        if inside and self._armed:
            self.touches_done += 1
            self._armed = False
            events.append(("touch", {"touches_done": self.touches_done,
                                     "required": self.required_touches}))
            if self.touches_done >= self.required_touches:
                events.append(("familiarization", {
                    "result": "pass", "attempt": self.attempt}))
            else:
                events.append(("sphere", self.place(rng, sampler, t, tick.tip)))
        elif not inside:
            self._armed = True
        return events

    @property
    def passed(self) -> bool:
        return self.touches_done >= self.required_touches

    def time_left_ms(self, t_ms: int) -> int:
        if self.deadline_ms is None:
            return self.time_limit_ms
        return max(0, self.deadline_ms - t_ms)


@dataclass(frozen=True)
class QuizChoice:
    text: str
    value: str


@dataclass(frozen=True)
class QuizItem:
    id: str
    attribute: str  # color | consistency | diagnosis
    prompt: str
    choices: tuple[QuizChoice, ...]
    correct_index: int

    def __post_init__(self):
        if len(self.choices) < 2:
            raise ValueError("quiz item needs at least two choices")
        if not 0 <= self.correct_index < len(self.choices):
            raise ValueError("correct_index out of range")


def quiz_bank(scenario: Scenario | str) -> list[QuizItem]:
    """The scenario's question bank, loaded from the packaged data file."""
    scenario = Scenario(scenario)
    ref = resources.files("palpatron").joinpath(f"assets/quiz/{scenario.value}.json")
    raw = json.loads(ref.read_text(encoding="utf-8"))
    return [QuizItem(item["id"], item["attribute"], item["prompt"],
                     tuple(QuizChoice(c["text"], c["value"])
                           for c in item["choices"]),
                     int(item["correct_index"]))
            for item in raw]


def check_bank_ground_truth(model: TissueModel) -> None:
    """Assert the bank's correct answers match the model's derived truth."""
    truth = derive_attributes(model)
    for item in quiz_bank(model.scenario):
        expected = truth[item.attribute]
        actual = item.choices[item.correct_index].value
        if actual != expected:
            raise ValueError(
                f"{item.id}: bank says {actual!r}, model implies {expected!r}")


class Session:
    """Phase machine driven by servo ticks and trainee commands.

    Events are delivered through ``emit(t_ms, kind, payload)``; the caller
    (scripted runner or live server) forwards them to the recording and any
    live listeners.
    """

    def __init__(self, model: TissueModel, cfg: Config, seed: int,
                 emit: Callable[[int, str, dict], None]):
        self.model = model
        self.cfg = cfg
        self.emit = emit
        self.rng = session_rng(seed)
        self.quiz_items = quiz_bank(model.scenario)
        self.answers: dict[str, dict] = {}
        self._sampler = make_sphere_sampler(model, cfg)
        self.familiarization: FamiliarizationTask | None = None
        if cfg.get_bool("session.familiarize"):
            self.familiarization = FamiliarizationTask(
                sphere_radius=cfg.get("session.sphere_radius"),
                required_touches=cfg.get_int("session.required_touches"),
                time_limit_ms=int(cfg.get("session.time_limit") * 1000))
            self.phase = Phase.FAMILIARIZE
        else:
            self.phase = Phase.EXPLORE
        self._begun = False

    def begin(self, t_ms: int = 0) -> None:
        if not self._begun:
            self._begun = True
            self.emit(t_ms, "phase", {"phase": self.phase.value})

    def _advance(self, phase: Phase, t_ms: int) -> None:
        if PHASE_ORDER.index(phase) < PHASE_ORDER.index(self.phase):
            raise SessionError("phases never move backward")
        self.phase = phase
        self.emit(t_ms, "phase", {"phase": phase.value})

    def on_tick(self, tick: HapticTick) -> None:
        """Feed one servo tick (primary rig) through the phase logic."""
        self.begin(tick.t)
        if self.phase is Phase.FAMILIARIZE and self.familiarization is not None:
            for kind, payload in self.familiarization.step(
                    tick, self.rng, self._sampler):
                self.emit(tick.t, kind, payload)
            if self.familiarization.passed:
                self._advance(Phase.EXPLORE, tick.t)

    def input_allowed(self) -> bool:
        return self.phase in (Phase.FAMILIARIZE, Phase.EXPLORE)

    def submit_answer(self, item_id: str, choice_index: int, t_ms: int) -> dict:
        """Grade one answer; advances Explore->Quiz and Quiz->Report."""
        self.begin(t_ms)
        if self.phase is Phase.EXPLORE:
            self._advance(Phase.QUIZ, t_ms)
        if self.phase is not Phase.QUIZ:
            raise WrongPhaseError(f"answers not accepted in {self.phase.value}")
        item = next((i for i in self.quiz_items if i.id == item_id), None)
        if item is None:
            raise UnknownItemError(f"unknown quiz item {item_id!r}")
        if item_id in self.answers:
            raise RepeatedAnswerError(f"item {item_id!r} already answered")
        choice_index = int(choice_index)
        if not 0 <= choice_index < len(item.choices):
            raise UnknownItemError(f"choice {choice_index} out of range")
        correct = choice_index == item.correct_index
        self.answers[item_id] = {"choice": choice_index, "correct": correct}
        payload = {"item": item_id, "choice": choice_index, "correct": correct,
                   "score": self.quiz_score()}
        self.emit(t_ms, "answer", payload)
        if len(self.answers) == len(self.quiz_items):
            self._advance(Phase.REPORT, t_ms)
        return payload

    def quiz_score(self) -> float:
        if not self.quiz_items:
            return 0.0
        return sum(1 for a in self.answers.values() if a["correct"]) / len(self.quiz_items)

    def snapshot(self, t_ms: int) -> dict:
        """Phase-dependent state for streaming frames."""
        out: dict = {"phase": self.phase.value}
        if self.phase is Phase.FAMILIARIZE and self.familiarization is not None:
            task = self.familiarization
            out["sphere"] = {
                "center": list(task.current_center) if task.current_center else None,
                "radius": task.sphere_radius,
                "touches_done": task.touches_done,
                "required": task.required_touches,
                "attempt": task.attempt,
                "time_left_ms": task.time_left_ms(t_ms),
            }
        if self.phase in (Phase.EXPLORE, Phase.QUIZ):
            # menus are available while exploring; the first answer sent
            # advances the session into the quiz phase
            out["quiz"] = {
                "items": [{
                    "id": i.id, "attribute": i.attribute, "prompt": i.prompt,
                    "choices": [c.text for c in i.choices],
                    "answered": i.id in self.answers,
                } for i in self.quiz_items],
                "score": self.quiz_score(),
            }
        return out
