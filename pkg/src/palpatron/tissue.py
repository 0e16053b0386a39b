"""Pathology scenarios: stiffness fields, lesion features, appearance.

Each scenario builds a deterministic liver model from (kind, seed, config).
Material response is a surface stiffness scalar field: a uniform parenchyma
baseline plus truncated gaussian bumps per lesion, attenuated for buried
lesions.  Visible lesions also raise the shell geometry, which is baked
into the mesh once at build time.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .config import Config, ConfigError
from .geometry import (MeshQuery, SurfaceMesh, SurfaceQuery,
                       build_half_ellipsoid_shell, patch_centroids)

# gaussian bumps are cut to exactly zero this many sigmas out
CUTOFF_SIGMAS = 5.0

# feature centers are sampled on this band of the pole-to-rim parameter,
# keeping lesions on the upper, instrument-reachable part of the dome
FEATURE_V_RANGE = (0.05, 0.8)

LIVER_RED_BROWN = (0.55, 0.27, 0.23)
PALE_TINT = (0.85, 0.78, 0.70)


class Scenario(str, Enum):
    HEALTHY = "healthy"
    CIRRHOTIC = "cirrhotic"
    TUMORAL = "tumoral"
    HEPATIC = "hepatic"


class FeatureKind(str, Enum):
    NODULE = "nodule"
    SURFACE_CYST = "surface_cyst"
    DEEP_CYST = "deep_cyst"


@dataclass(frozen=True)
class PathologyFeature:
    kind: FeatureKind
    center: tuple[float, float, float]  # mm; below the surface for deep cysts
    radius_sigma: float                 # mm
    stiffness_delta: float              # N/m, nonnegative
    bump_height: float = 0.0            # mm
    burial_depth: float = 0.0           # mm
    visible: bool = True

    def __post_init__(self):
        if self.radius_sigma <= 0:
            raise ValueError("radius_sigma must be positive")
        if self.stiffness_delta < 0:
            raise ValueError("stiffness_delta must be nonnegative")
        if self.kind is FeatureKind.DEEP_CYST:
            if self.visible or self.bump_height != 0.0 or self.burial_depth <= 0.0:
                raise ValueError("deep cyst must be invisible, flat and buried")
        elif self.burial_depth != 0.0:
            raise ValueError("only deep cysts are buried")


@dataclass(frozen=True)
class Appearance:
    base_color: tuple[float, float, float]
    pallor: float  # 0 = native color, 1 = fully pale


class TissueModel:
    """Immutable scenario model; shareable read-only across threads."""

    def __init__(self, scenario: Scenario, mesh: SurfaceMesh,
                 base_stiffness_k0: float, global_multiplier: float,
                 damping_b: float, features: list[PathologyFeature],
                 appearance: Appearance, seed: int,
                 depth_attenuation: float = 6.0):
        self.scenario = scenario
        self.mesh = mesh
        self.base_stiffness_k0 = float(base_stiffness_k0)
        self.global_multiplier = float(global_multiplier)
        self.damping_b = float(damping_b)
        self.features = tuple(features)
        self.appearance = appearance
        self.seed = int(seed)
        self.depth_attenuation = float(depth_attenuation)
        self._query = MeshQuery(mesh)
        self._stiff_arrays = _field_arrays(
            [(f.center, f.radius_sigma,
              f.stiffness_delta * _burial_attenuation(f, self.depth_attenuation))
             for f in features])
        self._bump_arrays = _field_arrays(
            [(f.center, f.radius_sigma, f.bump_height)
             for f in features if f.bump_height > 0.0])

    @property
    def baseline_stiffness(self) -> float:
        """Lesion-free stiffness floor, N/m."""
        return self.global_multiplier * self.base_stiffness_k0

    @property
    def palpable_patch_count(self) -> int:
        return self.mesh.patch_count

    def stiffness_at(self, point) -> float:
        """Stiffness field k(x) in N/m at a point near the surface."""
        px, py, pz = float(point[0]), float(point[1]), float(point[2])
        centers, inv2s2, amps, cut2 = self._stiff_arrays
        delta = _kernels.gauss_sum(px, py, pz, centers, inv2s2, amps, cut2)
        return self.global_multiplier * (self.base_stiffness_k0 + delta)

    def displaced_height(self, point) -> float:
        """Visible bump elevation in mm at a point (deep cysts contribute 0)."""
        px, py, pz = float(point[0]), float(point[1]), float(point[2])
        centers, inv2s2, amps, cut2 = self._bump_arrays
        return _kernels.gauss_sum(px, py, pz, centers, inv2s2, amps, cut2)

    def surface_query(self, px: float, py: float, pz: float) -> SurfaceQuery:
        return self._query.query(px, py, pz)

    def surface_query_batch(self, points: np.ndarray):
        return self._query.query_batch(points)

    def patch_centroids(self) -> list[tuple[int, np.ndarray]]:
        return patch_centroids(self.mesh)

    def digest(self) -> str:
        """Byte-level fingerprint; equal digests mean bit-identical models."""
        h = hashlib.sha256()
        h.update(self.scenario.value.encode())
        h.update(self.mesh.digest().encode())
        h.update(struct.pack("<ddd", self.base_stiffness_k0,
                             self.global_multiplier, self.damping_b))
        h.update(struct.pack("<q", self.seed))
        h.update(struct.pack("<dddd", *self.appearance.base_color,
                             self.appearance.pallor))
        for f in self.features:
            h.update(f.kind.value.encode())
            h.update(struct.pack("<dddddd?", *f.center, f.radius_sigma,
                                 f.stiffness_delta, f.bump_height, f.visible))
            h.update(struct.pack("<d", f.burial_depth))
        return h.hexdigest()


def _burial_attenuation(feature: PathologyFeature, depth_attenuation: float) -> float:
    if feature.burial_depth == 0.0:
        return 1.0
    d = feature.burial_depth
    return math.exp(-(d * d) / (2.0 * depth_attenuation * depth_attenuation))


def _field_arrays(entries: list[tuple[tuple[float, float, float], float, float]]):
    n = len(entries)
    centers = np.zeros((n, 3), dtype=np.float64)
    inv2s2 = np.zeros(n, dtype=np.float64)
    amps = np.zeros(n, dtype=np.float64)
    cut2 = np.zeros(n, dtype=np.float64)
    for i, (center, sigma, amp) in enumerate(entries):
        centers[i] = center
        inv2s2[i] = 1.0 / (2.0 * sigma * sigma)
        amps[i] = amp
        cut2[i] = (CUTOFF_SIGMAS * sigma) ** 2
    return centers, inv2s2, amps, cut2


def _ellipsoid_point(axes: tuple[float, float, float], u: float, v: float):
    """Surface point and outward normal at azimuth fraction u, polar fraction v."""
    a, b, c = axes
    theta = (math.pi / 2.0) * v
    phi = 2.0 * math.pi * u
    p = (a * math.sin(theta) * math.cos(phi),
         b * math.sin(theta) * math.sin(phi),
         c * math.cos(theta))
    n = (p[0] / (a * a), p[1] / (b * b), p[2] / (c * c))
    nn = math.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
    return p, (n[0] / nn, n[1] / nn, n[2] / nn)


def _sample_surface(rng: np.random.Generator, axes) -> tuple[tuple, tuple]:
    u = float(rng.uniform(0.0, 1.0))
    v = float(rng.uniform(*FEATURE_V_RANGE))
    return _ellipsoid_point(axes, u, v)


def _make_features(kind: Scenario, rng: np.random.Generator, axes,
                   cfg: Config) -> list[PathologyFeature]:
    features: list[PathologyFeature] = []
    if kind is Scenario.CIRRHOTIC:
        count = cfg.get_int("cirrhotic.nodule_count")
        if count < 10:
            raise ConfigError("cirrhotic scenario needs at least 10 nodules")
        for _ in range(count):
            p, _n = _sample_surface(rng, axes)
            sigma = float(rng.uniform(cfg.get("cirrhotic.sigma_min"),
                                      cfg.get("cirrhotic.sigma_max")))
            features.append(PathologyFeature(
                FeatureKind.NODULE, p, sigma, cfg.get("cirrhotic.delta_k"),
                bump_height=cfg.get("cirrhotic.bump_height")))
    elif kind is Scenario.TUMORAL:
        n_surface = cfg.get_int("tumoral.surface_cysts")
        n_deep = cfg.get_int("tumoral.deep_cysts")
        if n_surface < 1 or n_deep < 1:
            raise ConfigError("tumoral scenario needs surface and deep cysts")
        for _ in range(n_surface):
            p, _n = _sample_surface(rng, axes)
            sigma = float(rng.uniform(cfg.get("tumoral.surface_sigma_min"),
                                      cfg.get("tumoral.surface_sigma_max")))
            features.append(PathologyFeature(
                FeatureKind.SURFACE_CYST, p, sigma,
                cfg.get("tumoral.surface_delta_k"),
                bump_height=cfg.get("tumoral.surface_bump")))
        for _ in range(n_deep):
            p, n = _sample_surface(rng, axes)
            sigma = float(rng.uniform(cfg.get("tumoral.deep_sigma_min"),
                                      cfg.get("tumoral.deep_sigma_max")))
            burial = float(rng.uniform(cfg.get("tumoral.burial_min"),
                                       cfg.get("tumoral.burial_max")))
            center = (p[0] - burial * n[0], p[1] - burial * n[1],
                      p[2] - burial * n[2])
            features.append(PathologyFeature(
                FeatureKind.DEEP_CYST, center, sigma,
                cfg.get("tumoral.deep_delta_k"),
                burial_depth=burial, visible=False))
    return features


def tissue_rng(seed: int) -> np.random.Generator:
    """Feature-sampling stream: child 0 of the session's root seed."""
    root = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.PCG64(root.spawn(2)[0]))


def build_scenario(kind: Scenario | str, seed: int,
                   config: Config | None = None,
                   mesh: SurfaceMesh | None = None) -> TissueModel:
    """Deterministic model for (kind, seed, config); see Scenario.

    ``mesh`` substitutes an externally loaded shell for the procedural one;
    lesion centers are still sampled on the configured analytic ellipsoid,
    so an external mesh should approximate the configured semi-axes.
    """
    kind = Scenario(kind)
    cfg = config or Config()

    k0 = cfg.get("tissue.base_stiffness")
    if k0 <= 0:
        raise ConfigError("tissue.base_stiffness must be positive")
    res_u, res_v = cfg.get_int("mesh.res_u"), cfg.get_int("mesh.res_v")
    if res_u <= 0 or res_v <= 0:
        raise ConfigError("mesh resolution must be positive")
    axes = (cfg.get("mesh.semi_axis_x"), cfg.get("mesh.semi_axis_y"),
            cfg.get("mesh.semi_axis_z"))
    if min(axes) <= 0:
        raise ConfigError("mesh semi-axes must be positive")

    multiplier, pallor = 1.0, 0.0
    if kind is Scenario.HEPATIC:
        multiplier = cfg.get("hepatic.multiplier")
        pallor = cfg.get("hepatic.pallor")
        if multiplier <= 1.0 or pallor <= 0.0:
            raise ConfigError("hepatic scenario needs multiplier > 1 and pallor > 0")

    rng = tissue_rng(seed)
    features = _make_features(kind, rng, axes, cfg)

    base = mesh if mesh is not None else build_half_ellipsoid_shell(
        axes, res_u, res_v,
        (cfg.get_int("mesh.patch_grid_u"), cfg.get_int("mesh.patch_grid_v")))

    mesh = base
    bump_entries = [(f.center, f.radius_sigma, f.bump_height)
                    for f in features if f.bump_height > 0.0]
    if bump_entries:
        centers, inv2s2, amps, cut2 = _field_arrays(bump_entries)
        offsets = np.empty(base.vertex_count, dtype=np.float64)
        verts = base.vertices
        for i in range(base.vertex_count):
            offsets[i] = _kernels.gauss_sum(verts[i, 0], verts[i, 1],
                                            verts[i, 2], centers, inv2s2,
                                            amps, cut2)
        mesh = base.displaced(offsets)

    return TissueModel(
        kind, mesh, k0, multiplier, cfg.get("tissue.damping"), features,
        Appearance(LIVER_RED_BROWN, pallor), seed,
        depth_attenuation=cfg.get("tissue.depth_attenuation"))


def derive_attributes(model: TissueModel) -> dict[str, str]:
    """Ground-truth quiz answers implied by the model itself."""
    visible_cysts = any(f.kind is FeatureKind.SURFACE_CYST and f.visible
                        for f in model.features)
    nodules = sum(1 for f in model.features if f.kind is FeatureKind.NODULE)
    deep = any(f.kind is FeatureKind.DEEP_CYST for f in model.features)

    if model.appearance.pallor > 0.0:
        color = "diffusely_pale"
    elif visible_cysts:
        color = "focal_discoloration"
    elif nodules >= 10:
        color = "red_brown_nodular"
    else:
        color = "uniform_red_brown"

    if model.global_multiplier > 1.0:
        consistency = "uniformly_increased"
    elif visible_cysts or deep:
        consistency = "focal_stiff_lesions"
    elif nodules >= 10:
        consistency = "nodular_irregular"
    else:
        consistency = "smooth_uniform"

    if model.global_multiplier > 1.0 and model.appearance.pallor > 0.0:
        diagnosis = "hepatic_stiffening"
    elif visible_cysts or deep:
        diagnosis = "tumoral_cysts"
    elif nodules >= 10:
        diagnosis = "cirrhosis"
    else:
        diagnosis = "healthy"

    return {"color": color, "consistency": consistency, "diagnosis": diagnosis}
