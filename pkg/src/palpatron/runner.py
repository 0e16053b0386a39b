"""Scripted simulation and replay verification.

``simulate`` consumes an input-sample script (JSONL) in virtual time: one
servo step per millisecond, no wall-clock pacing.  ``replay`` re-reads a
session file and either just validates/streams it (playback) or re-runs the
servo from the recorded inputs and compares every tick byte for byte
(verify).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import Config
from .geometry import read_palpmesh
from .haptics import (HapticTick, InputSample, RigState, ServoParams,
                      make_rig, servo_step)
from .recording import (RecordError, RecordReader, RecordWriter, file_sha256,
                        make_header, tick_line)
from .session import Session, SessionError
from .tissue import Scenario, build_scenario


class ScriptError(ValueError):
    """Malformed input script."""


@dataclass(frozen=True)
class AnswerLine:
    t: int
    item: str
    choice: int


def load_script(path: str | Path) -> list:
    """Parse a script: input samples plus optional quiz answers.

    Input lines look like ``{"t": 120, "state": {...}}`` (optional "rig");
    answer lines like ``{"t": 61000, "answer": {"item": id, "choice": n}}``.
    Input timestamps must be strictly increasing per rig.
    """
    path = Path(path)
    lines: list = []
    last_t: dict[int, int] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(),
                                 start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
            t = int(obj["t"])
        except (ValueError, KeyError):
            raise ScriptError(f"{path}:{lineno}: bad script line") from None
        if "answer" in obj:
            lines.append(AnswerLine(t, str(obj["answer"]["item"]),
                                    int(obj["answer"]["choice"])))
            continue
        if "state" not in obj:
            raise ScriptError(f"{path}:{lineno}: need 'state' or 'answer'")
        rig = int(obj.get("rig", 0))
        if rig in last_t and t <= last_t[rig]:
            raise ScriptError(
                f"{path}:{lineno}: input timestamps must increase (rig {rig})")
        last_t[rig] = t
        lines.append(InputSample(t, RigState.from_dict(obj["state"]), rig))
    lines.sort(key=lambda ln: ln.t)
    return lines


def dump_script(lines: list, path: str | Path) -> None:
    out = []
    for ln in lines:
        if isinstance(ln, InputSample):
            obj = {"t": ln.t, "state": ln.state.as_dict()}
            if ln.rig:
                obj["rig"] = ln.rig
        else:
            obj = {"t": ln.t, "answer": {"item": ln.item, "choice": ln.choice}}
        out.append(json.dumps(obj, separators=(",", ":")))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def script_duration(lines: list) -> int:
    return max((ln.t for ln in lines), default=0)


@dataclass
class RunResult:
    duration_ms: int
    tick_count: int
    event_count: int
    tick_times_ns: list = field(default_factory=list)


def run_scripted_session(scenario: Scenario | str, seed: int, cfg: Config,
                         script: list, writer: RecordWriter,
                         mesh_path: str | Path | None = None,
                         live_stamp: bool = False,
                         collect_timing: bool = False) -> RunResult:
    """Run a full scripted session and stream it to ``writer``."""
    scenario = Scenario(scenario)
    mesh_ref = None
    mesh = None
    if mesh_path is not None:
        mesh = read_palpmesh(mesh_path)
        mesh_ref = {"path": str(mesh_path), "sha256": file_sha256(mesh_path)}
    model = build_scenario(scenario, seed, cfg, mesh=mesh)

    rig_count = cfg.get_int("rig.count")
    rigs = [make_rig(cfg) for _ in range(rig_count)]
    params = ServoParams.from_config(cfg)

    events = 0

    def emit(t_ms: int, kind: str, payload: dict) -> None:
        nonlocal events
        events += 1
        writer.event(t_ms, kind, payload)

    session = Session(model, cfg, seed, emit)
    writer.header(make_header(scenario.value, seed, cfg,
                              rigs[0].instrument.value, rig_count,
                              live=live_stamp, mesh_ref=mesh_ref))
    session.begin(0)

    duration = script_duration(lines := list(script))
    targets = [RigState(**rig.state.as_dict()) for rig in rigs]
    idx = 0
    ticks = 0
    timings: list = []
    for t in range(1, duration + 1):
        while idx < len(lines) and lines[idx].t <= t:
            line = lines[idx]
            idx += 1
            if isinstance(line, InputSample):
                if line.state.finite() and 0 <= line.rig < rig_count:
                    targets[line.rig] = line.state
                    emit(line.t, "input", {"rig": line.rig,
                                           "state": line.state.as_dict()})
                else:
                    emit(line.t, "error", {"code": "bad_input",
                                           "detail": "non-finite or unknown rig"})
            else:
                try:
                    session.submit_answer(line.item, line.choice, line.t)
                except SessionError as exc:
                    emit(line.t, "error", {"code": exc.code, "detail": str(exc)})
        t0 = time.perf_counter_ns() if collect_timing else 0
        primary_tick: HapticTick | None = None
        for rig_idx, rig in enumerate(rigs):
            tick = servo_step(model, rig, targets[rig_idx], params, t, rig_idx)
            if rig_idx == 0:
                primary_tick = tick
            writer.tick(tick)
            ticks += 1
        session.on_tick(primary_tick)
        if collect_timing:
            timings.append(time.perf_counter_ns() - t0)
    if duration > 0:
        emit(duration, "end", {"quiz_score": session.quiz_score(),
                               "phase": session.phase.value})
    return RunResult(duration, ticks, events, timings)


def simulate_to_file(scenario, seed: int, cfg: Config, script_path: str | Path,
                     out_path: str | Path, mesh_path=None) -> RunResult:
    script = load_script(script_path)
    writer = RecordWriter.open(out_path)
    try:
        return run_scripted_session(scenario, seed, cfg, script, writer,
                                    mesh_path=mesh_path)
    finally:
        writer.close()


@dataclass
class ReplayReport:
    tick_count: int
    event_count: int
    verified: bool
    divergence_index: int | None = None   # position in the tick sequence
    divergence_line: int | None = None    # 1-based file line

    @property
    def ok(self) -> bool:
        return self.divergence_index is None


def _resimulated_lines(reader: RecordReader):
    """Re-run the servo from a record's header and input events."""
    cfg = reader.verify_config_hash()
    header = reader.header
    mesh = None
    if header.get("mesh"):
        ref = header["mesh"]
        if file_sha256(ref["path"]) != ref["sha256"]:
            raise RecordError(f"mesh file {ref['path']} hash mismatch")
        mesh = read_palpmesh(ref["path"])
    model = build_scenario(Scenario(header["scenario"]), header["seed"], cfg,
                           mesh=mesh)
    rig_count = int(header.get("rig_count", 1))
    rigs = [make_rig(cfg) for _ in range(rig_count)]
    params = ServoParams.from_config(cfg)

    inputs: list[InputSample] = []
    for rec in reader.events():
        if rec.obj.get("kind") == "input":
            p = rec.obj["payload"]
            inputs.append(InputSample(int(rec.obj["t"]),
                                      RigState.from_dict(p["state"]),
                                      int(p.get("rig", 0))))
    tick_recs = reader.tick_records()
    duration = max((r.obj["t"] for r in tick_recs), default=0)

    targets = [RigState(**rig.state.as_dict()) for rig in rigs]
    idx = 0
    for t in range(1, duration + 1):
        while idx < len(inputs) and inputs[idx].t <= t:
            s = inputs[idx]
            if 0 <= s.rig < rig_count:
                targets[s.rig] = s.state
            idx += 1
        for rig_idx, rig in enumerate(rigs):
            yield tick_line(servo_step(model, rig, targets[rig_idx], params,
                                       t, rig_idx))


def replay(path: str | Path, verify: bool = False) -> ReplayReport:
    """Playback validates and counts; verify also re-simulates and diffs."""
    reader = RecordReader(path)
    tick_recs = reader.tick_records()
    report = ReplayReport(len(tick_recs), len(reader.events()), verify)
    if not verify:
        return report
    for i, fresh in enumerate(_resimulated_lines(reader)):
        if i >= len(tick_recs) or fresh != tick_recs[i].raw:
            report.divergence_index = i
            report.divergence_line = (tick_recs[i].line_no
                                      if i < len(tick_recs) else None)
            return report
    return report
