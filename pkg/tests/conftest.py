from __future__ import annotations

import io
from functools import lru_cache

import pytest

from palpatron.config import Config
from palpatron.recording import RecordReader, RecordWriter
from palpatron.runner import run_scripted_session
from palpatron.scripts import sweep_script
from palpatron.tissue import Scenario, build_scenario


def make_cfg(**overrides) -> Config:
    base = {"session.familiarize": 0}
    base.update(overrides)
    return Config(base)


@pytest.fixture(scope="session")
def cfg() -> Config:
    return make_cfg()


@pytest.fixture(scope="session")
def healthy_model(cfg):
    return build_scenario(Scenario.HEALTHY, 1, cfg)


@pytest.fixture(scope="session")
def tumoral_model(cfg):
    return build_scenario(Scenario.TUMORAL, 7, cfg)


def run_in_memory(scenario, seed, cfg, script, **kwargs):
    """Run a scripted session into a buffer; returns (reader, result)."""
    buf = io.StringIO()
    writer = RecordWriter(buf)
    result = run_scripted_session(scenario, seed, cfg, script, writer, **kwargs)
    path_free_reader = _reader_from_text(buf.getvalue())
    return path_free_reader, result


def _reader_from_text(text: str, tmp_dir=None):
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as fh:
        fh.write(text)
        path = fh.name
    return RecordReader(path)


@lru_cache(maxsize=16)
def cached_sweep(scenario_value: str, seed: int):
    """(model, ticks, episodes-ready reader) for a full-coverage sweep."""
    from palpatron import assess

    cfg = make_cfg()
    model = build_scenario(Scenario(scenario_value), seed, cfg)
    script = sweep_script(model, cfg)
    reader, _ = run_in_memory(Scenario(scenario_value), seed, cfg, script)
    ticks = reader.ticks()
    episodes = assess.segment_taps(ticks, cfg.get("assess.tap_threshold"),
                                   cfg.get_int("assess.min_gap"))
    return model, ticks, episodes
