"""Streaming session service.

One trainee connection per session over a WebSocket carrying JSON text
frames (``palpwire/1``).  Three contexts share the work:

* servo thread: wall-clock-pegged 1 kHz stepping, compute only; consumes
  the latest commanded targets, publishes ticks and applied-input markers
  to an unbounded queue (ticks are never dropped);
* coordinator thread: session machine, recording writes, frame decimation
  into a latest-value mailbox (stale frames are dropped, never ticks);
* network: the asyncio socket, feeding commands in and draining frames,
  events and reports out.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections import deque
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from jsonschema import Draft202012Validator

from .assess import band_for_scenario, build_report, gauge_state
from .config import Config, ConfigError
from .haptics import (HapticTick, RigState, ServoParams, display_dimple,
                      make_rig, servo_step)
from .recording import RecordWriter, make_header
from .session import Phase, Session, SessionError
from .tissue import Scenario, build_scenario

WIRE_VERSION = "palpwire/1"
TICK_BURST_CAP = 250  # max catch-up ticks per servo wakeup


def _load_schema() -> dict:
    ref = resources.files("palpatron").joinpath("assets/wire-schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


_SCHEMA = _load_schema()
_CLIENT_VALIDATOR = Draft202012Validator(
    {"$ref": "#/$defs/client", "$defs": _SCHEMA["$defs"]})
_SERVER_VALIDATOR = Draft202012Validator(
    {"$ref": "#/$defs/server", "$defs": _SCHEMA["$defs"]})


def message(msg_type: str, t: int, payload: dict) -> dict:
    return {"v": WIRE_VERSION, "type": msg_type, "t": int(t), "payload": payload}


class _TapCounter:
    """Online episode counter for the frame stream's cone tally."""

    def __init__(self, threshold: float, min_gap: int):
        self.threshold = threshold
        self.min_gap = min_gap
        self.count = 0
        self._above = False
        self._last_above_t: int | None = None

    def feed(self, tick: HapticTick) -> None:
        above = tick.force_magnitude > self.threshold
        if above:
            if not self._above:
                if (self._last_above_t is None
                        or tick.t - self._last_above_t > self.min_gap):
                    self.count += 1  # genuinely new episode, not a gap merge
            self._above = True
            self._last_above_t = tick.t
        else:
            self._above = False


class SessionHost:
    """Owns one live session: servo and coordinator threads plus queues."""

    def __init__(self, scenario: Scenario, seed: int, cfg: Config,
                 record_path: Path):
        self.cfg = cfg
        self.scenario = scenario
        self.seed = seed
        self.model = build_scenario(scenario, seed, cfg)
        self.params = ServoParams.from_config(cfg)
        self.rig_count = cfg.get_int("rig.count")
        self.rigs = [make_rig(cfg) for _ in range(self.rig_count)]
        self.band = band_for_scenario(cfg, scenario.value)
        self.record_path = record_path
        self.writer = RecordWriter.open(record_path)

        self._input_queue: deque = deque()      # network -> servo
        self._tick_queue: deque = deque()       # servo -> coordinator
        self._outbox: deque = deque()           # coordinator -> network
        self._frame_lock = threading.Lock()
        self._latest_frame: dict | None = None
        self._running = False
        self._threads: list[threading.Thread] = []
        self._ticks: list[HapticTick] = []
        self._events: list[dict] = []
        self._report_sent = False
        self._taps = _TapCounter(cfg.get("assess.tap_threshold"),
                                 cfg.get_int("assess.min_gap"))
        self._frame_interval = 1000.0 / cfg.get("frames.rate")
        self._next_frame_t = 0.0

        def emit(t_ms: int, kind: str, payload: dict) -> None:
            event = {"t": t_ms, "kind": kind, "payload": payload}
            self._events.append(event)
            self.writer.event(t_ms, kind, payload)
            self._outbox.append(message("event", t_ms,
                                        {"kind": kind, **payload}))

        self.session = Session(self.model, cfg, seed, emit)

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self.writer.header(make_header(
            self.scenario.value, self.seed, self.cfg,
            self.rigs[0].instrument.value, self.rig_count, live=True))
        self.session.begin(0)
        self._outbox.append(message("event", 0, {
            "kind": "scene", **self.scene_payload()}))
        self._running = True
        servo = threading.Thread(target=self._servo_loop, name="servo",
                                 daemon=True)
        coord = threading.Thread(target=self._coordinator_loop,
                                 name="coordinator", daemon=True)
        self._threads = [servo, coord]
        servo.start()
        coord.start()

    def stop(self) -> Path:
        self._running = False
        for th in self._threads:
            th.join(timeout=5.0)
        self._drain_ticks()
        self.writer.close()
        return self.record_path

    # -- network-facing -----------------------------------------------------

    def submit_input(self, rig: int, state: RigState) -> bool:
        if not self.session.input_allowed():
            return False
        if not state.finite() or not 0 <= rig < self.rig_count:
            return False
        self._input_queue.append((rig, state))
        return True

    def submit_answer(self, item: str, choice: int) -> None:
        self._input_queue.append(("answer", item, choice))

    def latest_frame(self) -> dict | None:
        with self._frame_lock:
            frame, self._latest_frame = self._latest_frame, None
        return frame

    def drain_outbox(self) -> list[dict]:
        out = []
        while self._outbox:
            out.append(self._outbox.popleft())
        return out

    def scene_payload(self) -> dict:
        mesh = self.model.mesh
        return {
            "scenario": self.scenario.value,
            "seed": self.seed,
            "vertices": [round(float(v), 3) for v in mesh.vertices.ravel()],
            "triangles": [int(i) for i in mesh.triangles.ravel()],
            "patches": [int(p) for p in mesh.patch_ids],
            "appearance": {
                "base_color": list(self.model.appearance.base_color),
                "pallor": self.model.appearance.pallor,
            },
            "visible_features": [
                {"kind": f.kind.value, "center": list(f.center),
                 "sigma": f.radius_sigma}
                for f in self.model.features if f.visible],
            "band": {"low": self.band.low, "high": self.band.high},
            "fulcrum": [self.cfg.get("rig.fulcrum_x"),
                        self.cfg.get("rig.fulcrum_y"),
                        self.cfg.get("rig.fulcrum_z")],
        }

    # -- servo thread ------------------------------------------------------

    def _servo_loop(self) -> None:
        targets = [RigState(**rig.state.as_dict()) for rig in self.rigs]
        answers_pending: list[tuple] = []
        t0 = time.perf_counter()
        tick_no = 0
        while self._running:
            due = int((time.perf_counter() - t0) * 1000.0)
            due = min(due, tick_no + TICK_BURST_CAP)
            while tick_no < due:
                tick_no += 1
                while self._input_queue:
                    cmd = self._input_queue.popleft()
                    if cmd[0] == "answer":
                        answers_pending.append((tick_no, cmd[1], cmd[2]))
                    else:
                        rig_idx, state = cmd
                        targets[rig_idx] = state
                        self._tick_queue.append(
                            ("input", tick_no, rig_idx, state))
                for a in answers_pending:
                    self._tick_queue.append(("answer",) + a)
                answers_pending.clear()
                for rig_idx, rig in enumerate(self.rigs):
                    tick = servo_step(self.model, rig, targets[rig_idx],
                                      self.params, tick_no, rig_idx)
                    self._tick_queue.append(("tick", tick))
            time.sleep(0.001)

    # -- coordinator thread --------------------------------------------------

    def _coordinator_loop(self) -> None:
        while self._running:
            if not self._drain_ticks():
                time.sleep(0.002)

    def _drain_ticks(self) -> bool:
        did = False
        while self._tick_queue:
            did = True
            entry = self._tick_queue.popleft()
            if entry[0] == "input":
                _, t, rig_idx, state = entry
                self.writer.event(t, "input",
                                  {"rig": rig_idx, "state": state.as_dict()})
            elif entry[0] == "answer":
                _, t, item, choice = entry
                try:
                    self.session.submit_answer(item, choice, t)
                except SessionError as exc:
                    self._outbox.append(message("error", t, {
                        "code": exc.code, "detail": str(exc)}))
                if (self.session.phase is Phase.REPORT
                        and not self._report_sent):
                    self._send_report(t)
            else:
                tick: HapticTick = entry[1]
                self.writer.tick(tick)
                if tick.rig == 0:
                    self._ticks.append(tick)
                    self.session.on_tick(tick)
                    self._taps.feed(tick)
                    if tick.t >= self._next_frame_t:
                        self._next_frame_t = tick.t + self._frame_interval
                        frame = self._frame_payload(tick)
                        with self._frame_lock:
                            self._latest_frame = frame
        return did

    def _send_report(self, t_ms: int) -> None:
        self._report_sent = True
        report = build_report(self._ticks, self.model, self.cfg, self.band,
                              self._events)
        self._outbox.append(message("report", t_ms, report))

    def _frame_payload(self, tick: HapticTick) -> dict:
        mag = tick.force_magnitude
        snap = self.session.snapshot(tick.t)
        payload = {
            "phase": snap["phase"],
            "tip": list(tick.tip),
            "direction": list(tick.direction),
            "force": list(tick.force),
            "force_magnitude": mag,
            "gauge": gauge_state(mag, self.band).value,
            "penetration": tick.penetration,
            "dimple": display_dimple(tick, self.params),
            "sphere": snap.get("sphere"),
            "quiz": snap.get("quiz"),
            "band": {"low": self.band.low, "high": self.band.high},
            "cone_count": self._taps.count,
        }
        return message("frame", tick.t, payload)


def data_dir() -> Path:
    root = Path(os.environ.get("PALPATRON_DATA_DIR", "sessions"))
    root.mkdir(parents=True, exist_ok=True)
    return root


def create_app(cfg: Config | None = None,
               default_scenario: str | None = None) -> FastAPI:
    cfg = cfg or Config()
    app = FastAPI(title="palpatron")
    state = {"host": None}

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "busy": state["host"] is not None}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):  # noqa: C901 - protocol switch
        import asyncio

        await ws.accept()
        host: SessionHost | None = None

        async def send(msg: dict) -> None:
            await ws.send_text(json.dumps(msg, separators=(",", ":"),
                                          allow_nan=False))

        async def sender() -> None:
            while True:
                if host is not None:
                    for msg in host.drain_outbox():
                        await send(msg)
                    frame = host.latest_frame()
                    if frame is not None:
                        await send(frame)
                await asyncio.sleep(0.01)

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                now = 0 if host is None else len(host._ticks)
                try:
                    msg = json.loads(raw)
                except ValueError:
                    await send(message("error", now, {
                        "code": "malformed", "detail": "not valid JSON"}))
                    continue
                if not isinstance(msg, dict):
                    await send(message("error", now, {
                        "code": "malformed", "detail": "expected an object"}))
                    continue
                if "v" in msg and msg["v"] != WIRE_VERSION:
                    await send(message("error", now, {
                        "code": "version_mismatch",
                        "detail": f"server speaks {WIRE_VERSION}"}))
                    await ws.close(code=1002)
                    break
                errors = [e.message for e
                          in _CLIENT_VALIDATOR.iter_errors(msg)]
                if errors:
                    await send(message("error", now, {
                        "code": "malformed", "detail": errors[0][:200]}))
                    continue

                mtype = msg["type"]
                payload = msg.get("payload", {})
                if mtype == "hello":
                    await send(message("hello", 0, {
                        "server": "palpatron",
                        "scenarios": [s.value for s in Scenario],
                        "default_scenario": default_scenario,
                    }))
                elif mtype == "start":
                    if state["host"] is not None:
                        await send(message("error", now, {
                            "code": "busy",
                            "detail": "a session is already active"}))
                        break
                    scenario = Scenario(payload.get(
                        "scenario", default_scenario or "healthy"))
                    seed = int(payload.get("seed", 0))
                    try:
                        session_cfg = cfg.with_overrides(
                            payload.get("overrides", {}))
                    except ConfigError as exc:
                        await send(message("error", now, {
                            "code": "bad_config", "detail": str(exc)}))
                        continue
                    stamp = time.strftime("%Y%m%dT%H%M%S")
                    path = data_dir() / f"{scenario.value}-seed{seed}-{stamp}-{os.getpid()}.jsonl"
                    host = SessionHost(scenario, seed, session_cfg, path)
                    state["host"] = host
                    host.start()
                elif mtype == "input":
                    if host is None:
                        await send(message("error", now, {
                            "code": "no_session", "detail": "send start first"}))
                        continue
                    accepted = host.submit_input(
                        int(payload.get("rig", 0)),
                        RigState.from_dict(payload["state"]))
                    if not accepted:
                        await send(message("error", now, {
                            "code": "wrong_phase",
                            "detail": "input ignored in this phase"}))
                elif mtype == "answer":
                    if host is None:
                        await send(message("error", now, {
                            "code": "no_session", "detail": "send start first"}))
                        continue
                    host.submit_answer(str(payload["item"]),
                                       int(payload["choice"]))
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            if host is not None:
                host.stop()
                state["host"] = None
            try:
                await ws.close()
            except RuntimeError:
                pass  # already closed or peer gone

    return app


def serve_forever(host: str, port: int, cfg: Config,
                  default_scenario: str | None = None) -> None:
    import uvicorn

    app = create_app(cfg, default_scenario)
    uvicorn.run(app, host=host, port=port, log_level="warning")
