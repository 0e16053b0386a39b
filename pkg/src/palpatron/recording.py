"""Session persistence: newline-delimited JSON records.

Line 1 is the header object; every further line is a tick or an event.
Serialization is canonical (fixed key order, shortest round-trip floats) so
that a re-run of the same inputs produces byte-identical files, which is
what replay verification compares.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from . import _kernels
from .config import Config
from .haptics import HapticTick

SCHEMA = "palpsession/1"

# simulate mode writes a fixed timestamp so identical runs are identical
# files; live serving stamps wall-clock time.  Override via env if needed.
FIXED_CREATED_AT = "1970-01-01T00:00:00Z"


class RecordError(Exception):
    """Malformed or inconsistent session file."""

    def __init__(self, message: str, line_no: int | None = None,
                 offset: int | None = None):
        super().__init__(message)
        self.line_no = line_no
        self.offset = offset


class SchemaVersionError(RecordError):
    pass


class ConfigHashError(RecordError):
    pass


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def tick_to_obj(tick: HapticTick) -> dict:
    obj = {
        "k": "tick",
        "t": tick.t,
        "rig": tick.rig,
        "tip": [tick.tip[0], tick.tip[1], tick.tip[2]],
        "vel": [tick.tip_velocity[0], tick.tip_velocity[1], tick.tip_velocity[2]],
        "dir": [tick.direction[0], tick.direction[1], tick.direction[2]],
        "force": [tick.force[0], tick.force[1], tick.force[2]],
        "contact": tick.contact,
        "pen": tick.penetration,
    }
    if tick.contact:
        obj["cp"] = [tick.contact_point[0], tick.contact_point[1],
                     tick.contact_point[2]]
        obj["patch"] = tick.patch_id
    return obj


def obj_to_tick(obj: dict) -> HapticTick:
    return HapticTick(
        t=int(obj["t"]), rig=int(obj.get("rig", 0)),
        tip=tuple(obj["tip"]), tip_velocity=tuple(obj["vel"]),
        direction=tuple(obj["dir"]), force=tuple(obj["force"]),
        contact=bool(obj["contact"]), penetration=float(obj["pen"]),
        contact_point=tuple(obj["cp"]) if "cp" in obj else None,
        patch_id=int(obj["patch"]) if "patch" in obj else None,
    )


def tick_line(tick: HapticTick) -> str:
    return _dumps(tick_to_obj(tick))


def created_at_stamp(live: bool) -> str:
    env = os.environ.get("PALPATRON_CREATED_AT")
    if env:
        return env
    if live:
        import datetime
        return datetime.datetime.now(datetime.timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ")
    return FIXED_CREATED_AT


def make_header(scenario: str, seed: int, cfg: Config, instrument: str,
                rig_count: int, live: bool = False,
                mesh_ref: dict | None = None) -> dict:
    return {
        "k": "header",
        "schema": SCHEMA,
        "scenario": scenario,
        "seed": int(seed),
        "instrument": instrument,
        "rig_count": int(rig_count),
        "config": cfg.snapshot(),
        "config_sha256": cfg.digest(),
        "created_at": created_at_stamp(live),
        "backend": _kernels.backend_name,
        "mesh": mesh_ref,
    }


class RecordWriter:
    """Streams one session to a JSONL file handle."""

    def __init__(self, fh: IO[str]):
        self._fh = fh
        self._wrote_header = False

    @classmethod
    def open(cls, path: str | Path) -> "RecordWriter":
        return cls(open(path, "w", encoding="utf-8", newline="\n"))

    def header(self, header_obj: dict) -> None:
        assert not self._wrote_header, "exactly one header per record"
        self._fh.write(_dumps(header_obj) + "\n")
        self._wrote_header = True

    def tick(self, tick: HapticTick) -> None:
        self._fh.write(tick_line(tick) + "\n")

    def event(self, t_ms: int, kind: str, payload: dict) -> None:
        self._fh.write(_dumps({"k": "event", "t": int(t_ms), "kind": kind,
                               "payload": payload}) + "\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


@dataclass(frozen=True)
class Record:
    kind: str        # "tick" | "event"
    obj: dict
    raw: str         # serialized line without newline
    line_no: int     # 1-based, header is line 1
    offset: int      # byte offset of line start


class RecordReader:
    """Validating reader; keeps byte offsets for precise error reports."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.header: dict = {}
        self._lines: list[Record] = []
        self._parse()

    def _parse(self) -> None:
        data = self.path.read_bytes()
        offset = 0
        line_no = 0
        last_good = 0
        while offset < len(data):
            nl = data.find(b"\n", offset)
            if nl < 0:
                raise RecordError(
                    f"{self.path}: truncated record, last valid byte offset {last_good}",
                    line_no=line_no + 1, offset=last_good)
            raw = data[offset:nl]
            line_no += 1
            try:
                obj = json.loads(raw.decode("utf-8"))
                kind = obj["k"]
            except (ValueError, KeyError, UnicodeDecodeError):
                raise RecordError(
                    f"{self.path}: corrupt record at line {line_no} "
                    f"(byte offset {offset}); last valid byte offset {last_good}",
                    line_no=line_no, offset=offset) from None
            if line_no == 1:
                if kind != "header":
                    raise RecordError(f"{self.path}: first line must be the header",
                                      line_no=1, offset=0)
                if obj.get("schema") != SCHEMA:
                    raise SchemaVersionError(
                        f"{self.path}: unsupported schema {obj.get('schema')!r}"
                        f" (expected {SCHEMA})", line_no=1, offset=0)
                self.header = obj
            elif kind in ("tick", "event"):
                self._lines.append(Record(kind, obj, raw.decode("utf-8"),
                                          line_no, offset))
            else:
                raise RecordError(f"{self.path}: unknown record kind {kind!r}",
                                  line_no=line_no, offset=offset)
            last_good = nl + 1
            offset = nl + 1
        if not self.header:
            raise RecordError(f"{self.path}: empty file, no header",
                              line_no=0, offset=0)

    def verify_config_hash(self) -> Config:
        """Rebuild the header's config and check its recorded hash."""
        cfg = Config(self.header.get("config", {}))
        stated = self.header.get("config_sha256")
        if cfg.digest() != stated:
            raise ConfigHashError(
                f"{self.path}: config snapshot hash mismatch "
                f"(recorded {stated!r}, recomputed {cfg.digest()!r})")
        return cfg

    def records(self) -> Iterator[Record]:
        return iter(self._lines)

    def ticks(self) -> list[HapticTick]:
        return [obj_to_tick(r.obj) for r in self._lines if r.kind == "tick"]

    def tick_records(self) -> list[Record]:
        return [r for r in self._lines if r.kind == "tick"]

    def events(self) -> list[Record]:
        return [r for r in self._lines if r.kind == "event"]


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()
