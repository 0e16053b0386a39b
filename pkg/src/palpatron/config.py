"""Flat dotted-key configuration.

Every tunable in the simulator lives in one registry of numeric values.
Config files are plain text, one ``key = value`` per line; the same keys can
be passed on the command line as ``key=value`` overrides.  The fully resolved
mapping is snapshotted into every session header together with a canonical
hash so a recording is self-describing.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration key or value."""


# All values numeric.  Booleans are 0/1, enums are small integers
# (documented next to the key).  Units in comments.
DEFAULTS: dict[str, float] = {
    # liver shell geometry (mm / counts)
    "mesh.semi_axis_x": 140.0,
    "mesh.semi_axis_y": 80.0,
    "mesh.semi_axis_z": 60.0,
    "mesh.res_u": 60,          # azimuth subdivisions
    "mesh.res_v": 40,          # polar subdivisions
    "mesh.patch_grid_u": 20,   # coverage patches, azimuth
    "mesh.patch_grid_v": 10,   # coverage patches, polar
    # parenchyma
    "tissue.base_stiffness": 600.0,   # N/m
    "tissue.damping": 2.0,            # N*s/m
    "tissue.depth_attenuation": 6.0,  # mm, buried-lesion damping length
    # hepatic scenario
    "hepatic.multiplier": 2.5,
    "hepatic.pallor": 0.5,
    # cirrhotic scenario
    "cirrhotic.nodule_count": 40,
    "cirrhotic.sigma_min": 4.0,       # mm
    "cirrhotic.sigma_max": 8.0,       # mm
    "cirrhotic.delta_k": 900.0,       # N/m
    "cirrhotic.bump_height": 1.5,     # mm
    # tumoral scenario
    "tumoral.surface_cysts": 2,
    "tumoral.deep_cysts": 2,
    "tumoral.surface_delta_k": 1200.0,  # N/m
    "tumoral.deep_delta_k": 800.0,      # N/m
    "tumoral.surface_sigma_min": 10.0,  # mm
    "tumoral.surface_sigma_max": 14.0,  # mm
    "tumoral.deep_sigma_min": 13.0,     # mm
    "tumoral.deep_sigma_max": 17.0,     # mm
    "tumoral.surface_bump": 2.0,        # mm
    "tumoral.burial_min": 5.0,          # mm
    "tumoral.burial_max": 7.5,          # mm
    # instrument rig
    "rig.count": 1,
    "rig.instrument": 1,        # 0 = maryland, 1 = babcock
    "rig.tool_length": 250.0,   # mm
    "rig.fulcrum_x": 0.0,
    "rig.fulcrum_y": 0.0,
    "rig.fulcrum_z": 150.0,
    "rig.tip_radius_maryland": 2.0,  # mm
    "rig.tip_radius_babcock": 5.0,   # mm
    "rig.rate_angular": 2.0,         # rad/s, yaw/pitch/roll slew
    "rig.rate_insertion": 200.0,     # mm/s
    "rig.rate_grip": 5.0,            # 1/s
    "rig.initial_insertion": 40.0,   # mm
    # servo
    "servo.force_clamp": 4.0,   # N
    "servo.dimple_scale": 6.0,  # mm per mm of penetration
    "servo.dimple_cap": 25.0,   # mm
    # session
    "session.familiarize": 1,
    "session.sphere_radius": 10.0,   # mm
    "session.required_touches": 5,
    "session.time_limit": 30.0,      # s
    # assessment
    "assess.tap_threshold": 0.3,   # N
    "assess.min_gap": 50,          # ms
    "band.healthy.low": 2.1,
    "band.healthy.high": 2.5,
    "band.cirrhotic.low": 2.1,
    "band.cirrhotic.high": 2.5,
    "band.tumoral.low": 2.1,
    "band.tumoral.high": 2.5,
    "band.hepatic.low": 2.6,
    "band.hepatic.high": 3.2,
    "classify.peak_cv_max": 0.15,
    "classify.speed_cv_max": 0.20,
    "classify.in_band_min": 0.8,
    "cones.height_per_newton": 6.0,   # mm/N
    "cones.radius_per_newton": 2.5,   # mm/N
    "lesion.deviation": 0.2,          # relative stiffness deviation
    "lesion.radius_sigmas": 1.5,      # episode-to-center gate, in sigma
    # streaming
    "frames.rate": 60,   # Hz
}


def _canonical(value: float) -> str:
    return repr(float(value))


class Config:
    """Resolved configuration: defaults plus any overrides."""

    def __init__(self, overrides: dict[str, float] | None = None):
        self._values = dict(DEFAULTS)
        if overrides:
            for key, value in overrides.items():
                self._set(key, value)

    def _set(self, key: str, value: float) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"non-numeric value for {key!r}: {value!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"non-finite value for {key!r}")
        self._values[key] = value

    def get(self, key: str) -> float:
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key: {key!r}") from None

    def get_int(self, key: str) -> int:
        return int(round(self.get(key)))

    def get_bool(self, key: str) -> bool:
        return self.get(key) != 0.0

    def snapshot(self) -> dict[str, float]:
        """Full resolved mapping in sorted key order."""
        return {k: float(self._values[k]) for k in sorted(self._values)}

    def digest(self) -> str:
        """Canonical sha256 over the resolved snapshot."""
        text = "\n".join(f"{k}={_canonical(v)}" for k, v in self.snapshot().items())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def with_overrides(self, overrides: dict[str, float]) -> "Config":
        merged = dict(self._values)
        merged.update(overrides)
        return Config(merged)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, float]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            values[key] = float(value.strip())
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: non-numeric value {value.strip()!r}") from None
    return values


def load_config_file(path: str | Path) -> dict[str, float]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def parse_override(text: str) -> tuple[str, float]:
    """Parse a single command-line ``key=value`` override."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, _, value = text.partition("=")
    try:
        return key.strip(), float(value.strip())
    except ValueError:
        raise ConfigError(f"non-numeric override value in {text!r}") from None


def build_config(sources: tuple[str, ...] = ()) -> Config:
    """Resolve config from a mix of file paths and inline key=value strings."""
    overrides: dict[str, float] = {}
    for source in sources:
        if "=" in source:
            key, value = parse_override(source)
            overrides[key] = value
        else:
            overrides.update(load_config_file(source))
    return Config(overrides)
