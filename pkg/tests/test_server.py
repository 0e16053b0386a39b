import json
import time

import pytest
from jsonschema import Draft202012Validator
from starlette.testclient import TestClient

from palpatron.config import Config
from palpatron.runner import replay
from palpatron.server import WIRE_VERSION, _SCHEMA, create_app, message
from palpatron.scripts import ik_state

SERVER_VALIDATOR = Draft202012Validator(
    {"$ref": "#/$defs/server", "$defs": _SCHEMA["$defs"]})


@pytest.fixture()
def client(tmp_path, monkeypatch):
    monkeypatch.setenv("PALPATRON_DATA_DIR", str(tmp_path / "sessions"))
    app = create_app(Config(), default_scenario="healthy")
    with TestClient(app) as tc:
        yield tc


def _recv_until(ws, msg_type, limit=400, kind=None):
    for _ in range(limit):
        msg = json.loads(ws.receive_text())
        SERVER_VALIDATOR.validate(msg)
        if msg["type"] == msg_type and (kind is None
                                        or msg["payload"].get("kind") == kind):
            return msg
    raise AssertionError(f"no {msg_type} message within {limit} messages")


def _start(ws, scenario="healthy", seed=1, overrides=None):
    ws.send_text(json.dumps(message("hello", 0, {})))
    hello = _recv_until(ws, "hello")
    assert hello["payload"]["server"] == "palpatron"
    payload = {"scenario": scenario, "seed": seed}
    if overrides:
        payload["overrides"] = overrides
    ws.send_text(json.dumps(message("start", 0, payload)))


def test_handshake_first_frame_fast(client):
    with client.websocket_connect("/ws") as ws:
        _start(ws, seed=1)
        t0 = time.perf_counter()
        scene = _recv_until(ws, "event", kind="scene")
        assert len(scene["payload"]["vertices"]) == 3 * 2401
        frame = _recv_until(ws, "frame")
        elapsed = time.perf_counter() - t0
        assert frame["payload"]["phase"] == "familiarize"
        assert frame["payload"]["sphere"] is not None
        assert elapsed < 2.0  # handshake contract is 100 ms; CI margin


def test_input_wrong_phase_rejected(client):
    overrides = {"session.familiarize": 0}
    with client.websocket_connect("/ws") as ws:
        _start(ws, seed=2, overrides=overrides)
        _recv_until(ws, "frame")
        # answer everything: phase goes quiz -> report, inputs then rejected
        from palpatron.session import quiz_bank
        for item in quiz_bank("healthy"):
            ws.send_text(json.dumps(message(
                "answer", 0, {"item": item.id, "choice": item.correct_index})))
        _recv_until(ws, "report")
        ws.send_text(json.dumps(message("input", 0, {
            "state": {"yaw": 0.1, "pitch": 0.0, "insertion": 50.0}})))
        err = _recv_until(ws, "error")
        assert err["payload"]["code"] == "wrong_phase"


def test_malformed_message_keeps_connection(client):
    with client.websocket_connect("/ws") as ws:
        ws.send_text("{not json at all")
        err = _recv_until(ws, "error")
        assert err["payload"]["code"] == "malformed"
        # still alive: hello works afterwards
        ws.send_text(json.dumps(message("hello", 0, {})))
        assert _recv_until(ws, "hello")


def test_schema_invalid_payload_kept(client):
    with client.websocket_connect("/ws") as ws:
        bad = message("input", 0, {"state": {"yaw": "sideways"}})
        ws.send_text(json.dumps(bad))
        err = _recv_until(ws, "error")
        assert err["payload"]["code"] == "malformed"


def test_version_mismatch_closes(client):
    with client.websocket_connect("/ws") as ws:
        msg = message("hello", 0, {})
        msg["v"] = "palpwire/999"
        ws.send_text(json.dumps(msg))
        err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "version_mismatch"
        with pytest.raises(Exception):
            ws.receive_text()  # server closed the connection


def test_fuzzed_messages_never_crash(client):
    import random
    rng = random.Random(7)
    junk = [
        "null", "[]", '""', "123",
        json.dumps({"v": WIRE_VERSION, "type": "input", "t": -1, "payload": {}}),
        json.dumps({"v": WIRE_VERSION, "type": "start"}),
        json.dumps({"v": WIRE_VERSION, "type": "frame", "t": 0, "payload": {}}),
        json.dumps({"v": WIRE_VERSION, "type": "answer", "t": 0,
                    "payload": {"item": 5, "choice": "x"}}),
        "\x00\x01\x02",
    ]
    with client.websocket_connect("/ws") as ws:
        for _ in range(40):
            ws.send_text(rng.choice(junk))
            msg = json.loads(ws.receive_text())
            assert msg["type"] == "error"
            assert msg["payload"]["code"] in ("malformed", "no_session")
        ws.send_text(json.dumps(message("hello", 0, {})))
        assert _recv_until(ws, "hello")


def test_live_session_records_and_verifies(client, tmp_path):
    overrides = {"session.familiarize": 0}
    with client.websocket_connect("/ws") as ws:
        _start(ws, seed=5, overrides=overrides)
        frame = _recv_until(ws, "frame")
        assert frame["payload"]["phase"] == "explore"
        # drive the tip into the tissue and back out
        fulcrum = (0.0, 0.0, 150.0)
        down = ik_state(fulcrum, (20.0, 10.0, 52.0))
        for state in (down,):
            ws.send_text(json.dumps(message("input", 0, {
                "state": state.as_dict()})))
        # wait until contact shows up in frames
        deadline = time.time() + 5.0
        contact_seen = False
        while time.time() < deadline:
            msg = json.loads(ws.receive_text())
            SERVER_VALIDATOR.validate(msg)
            if msg["type"] == "frame" and msg["payload"]["force_magnitude"] > 0.2:
                contact_seen = True
                break
        assert contact_seen
    # connection closed: the session file must exist and verify
    sessions = list((tmp_path / "sessions").glob("*.jsonl"))
    assert len(sessions) == 1
    report = replay(sessions[0], verify=True)
    assert report.ok
    assert report.tick_count > 0


def test_second_connection_rejected_while_busy(client):
    with client.websocket_connect("/ws") as ws1:
        _start(ws1, seed=6)
        _recv_until(ws1, "frame")
        with client.websocket_connect("/ws") as ws2:
            ws2.send_text(json.dumps(message("start", 0, {
                "scenario": "healthy", "seed": 7})))
            err = json.loads(ws2.receive_text())
            assert err["payload"]["code"] == "busy"


def test_outgoing_messages_validate_against_schema(client):
    with client.websocket_connect("/ws") as ws:
        _start(ws, seed=8)
        for _ in range(30):
            SERVER_VALIDATOR.validate(json.loads(ws.receive_text()))


def test_published_schema_matches_runtime_copy():
    from importlib import resources
    from pathlib import Path
    packaged = json.loads(resources.files("palpatron")
                          .joinpath("assets/wire-schema.json").read_text())
    published = json.loads(
        (Path(__file__).resolve().parents[1] / "docs" / "wire-schema.json")
        .read_text())
    assert packaged == published
