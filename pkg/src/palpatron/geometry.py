"""Liver shell geometry: procedural mesh, nearest-point queries, patch grid.

The organ surface is an open half-ellipsoid shell triangulated from a polar
(u = azimuth, v = pole-to-rim) parameterization.  A coarse patch grid over
the same parameterization partitions the triangles into the coverage cells
used by the assessment metrics.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

MESH_MAGIC = "palpmesh v1"


class MeshFormatError(ValueError):
    """Malformed external mesh file."""


@dataclass(frozen=True)
class SurfaceQuery:
    """Result of a nearest-point query against the shell."""

    nearest_point: tuple[float, float, float]
    normal: tuple[float, float, float]
    signed_distance: float  # mm; negative below the surface
    triangle: int
    patch_id: int


class SurfaceMesh:
    """Open triangulated shell with per-triangle coverage patch ids.

    Arrays are locked read-only after construction; a mesh is safe to share
    across threads.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray,
                 patch_ids: np.ndarray, patch_count: int,
                 vertex_normals: np.ndarray | None = None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int32)
        self.patch_ids = np.ascontiguousarray(patch_ids, dtype=np.int32)
        self.patch_count = int(patch_count)
        if vertex_normals is None:
            vertex_normals = compute_vertex_normals(self.vertices, self.triangles)
        self.vertex_normals = np.ascontiguousarray(vertex_normals, dtype=np.float64)
        for arr in (self.vertices, self.triangles, self.patch_ids, self.vertex_normals):
            arr.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def validate(self) -> None:
        """Check the structural invariants; raises MeshFormatError."""
        if self.triangles.size and int(self.triangles.max()) >= self.vertex_count:
            raise MeshFormatError("triangle index out of range")
        if self.triangles.size and int(self.triangles.min()) < 0:
            raise MeshFormatError("negative triangle index")
        norms = np.linalg.norm(self.vertex_normals, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-6):
            raise MeshFormatError("vertex normals not unit length")
        if self.patch_ids.shape[0] != self.triangle_count:
            raise MeshFormatError("patch id per triangle required")
        if self.patch_ids.size and not (0 <= int(self.patch_ids.min())
                                        and int(self.patch_ids.max()) < self.patch_count):
            raise MeshFormatError("patch id out of range")
        # open manifold: every edge on at most two triangles
        edges: dict[tuple[int, int], int] = {}
        for tri in self.triangles:
            for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(e), max(e))
                edges[key] = edges.get(key, 0) + 1
                if edges[key] > 2:
                    raise MeshFormatError(f"non-manifold edge {key}")

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.vertices.tobytes())
        h.update(self.triangles.tobytes())
        h.update(self.patch_ids.tobytes())
        h.update(self.vertex_normals.tobytes())
        h.update(struct.pack("<i", self.patch_count))
        return h.hexdigest()

    def displaced(self, offsets: np.ndarray) -> "SurfaceMesh":
        """New mesh with vertices moved ``offsets`` mm along their normals."""
        moved = self.vertices + self.vertex_normals * offsets[:, None]
        return SurfaceMesh(moved, self.triangles, self.patch_ids, self.patch_count)

    def bounds(self, inflate: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        lo = self.vertices.min(axis=0) - inflate
        hi = self.vertices.max(axis=0) + inflate
        return lo, hi


def compute_vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (face normals accumulated, normalized)."""
    normals = np.zeros_like(vertices)
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    face = np.cross(v1 - v0, v2 - v0)
    for k in range(3):
        np.add.at(normals, triangles[:, k], face)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return normals / norms


def build_half_ellipsoid_shell(semi_axes: tuple[float, float, float],
                               res_u: int, res_v: int,
                               patch_grid: tuple[int, int]) -> SurfaceMesh:
    """Upper half of an ellipsoid, open at the equator rim.

    ``res_u`` azimuth columns by ``res_v`` polar rows of cells; a single
    apex vertex caps row 0.  Patch ids tile the (u, v) parameter square with
    ``patch_grid`` = (grid_u, grid_v); res_u/res_v need not divide evenly.
    """
    if res_u < 3 or res_v < 1:
        raise MeshFormatError("mesh resolution too small")
    a, b, c = semi_axes
    grid_u, grid_v = patch_grid

    verts = [(0.0, 0.0, c)]
    for iv in range(1, res_v + 1):
        theta = (math.pi / 2.0) * iv / res_v
        st, ct = math.sin(theta), math.cos(theta)
        for iu in range(res_u):
            phi = 2.0 * math.pi * iu / res_u
            verts.append((a * st * math.cos(phi), b * st * math.sin(phi), c * ct))
    vertices = np.array(verts, dtype=np.float64)

    def ring(iv: int, iu: int) -> int:
        return 1 + (iv - 1) * res_u + (iu % res_u)

    def pid(row: int, col: int) -> int:
        return (row * grid_v // res_v) * grid_u + (col * grid_u // res_u)

    tris: list[tuple[int, int, int]] = []
    patches: list[int] = []
    # apex fan (cell row 0); counter-clockwise seen from +z = outward
    for iu in range(res_u):
        tris.append((0, ring(1, iu), ring(1, iu + 1)))
        patches.append(pid(0, iu))
    # quad strips (cell rows 1 .. res_v-1)
    for iv in range(1, res_v):
        for iu in range(res_u):
            p00 = ring(iv, iu)
            p01 = ring(iv, iu + 1)
            p10 = ring(iv + 1, iu)
            p11 = ring(iv + 1, iu + 1)
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
            patches.append(pid(iv, iu))
            patches.append(pid(iv, iu))
    triangles = np.array(tris, dtype=np.int32)
    patch_ids = np.array(patches, dtype=np.int32)
    return SurfaceMesh(vertices, triangles, patch_ids, grid_u * grid_v)


def patch_centroids(mesh: SurfaceMesh) -> list[tuple[int, np.ndarray]]:
    """Area-weighted centroid per nonempty patch, ordered by patch id."""
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    v1 = mesh.vertices[mesh.triangles[:, 1]]
    v2 = mesh.vertices[mesh.triangles[:, 2]]
    centroid = (v0 + v1 + v2) / 3.0
    area = 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)
    out: list[tuple[int, np.ndarray]] = []
    for p in range(mesh.patch_count):
        sel = mesh.patch_ids == p
        if not np.any(sel):
            continue
        w = area[sel]
        out.append((p, (centroid[sel] * w[:, None]).sum(axis=0) / w.sum()))
    return out


class MeshQuery:
    """Nearest-point queries against one mesh via the active kernel backend."""

    def __init__(self, mesh: SurfaceMesh):
        self.mesh = mesh
        tri = mesh.triangles
        va = mesh.vertices[tri[:, 0]]
        vb = mesh.vertices[tri[:, 1]]
        vc = mesh.vertices[tri[:, 2]]
        self._a = np.ascontiguousarray(va)
        self._ab = np.ascontiguousarray(vb - va)
        self._ac = np.ascontiguousarray(vc - va)
        # conservative per-triangle bounds for the compiled prune; slightly
        # inflated so rounding can only make the prune weaker, never wrong
        cen = (va + vb + vc) / 3.0
        rad = np.maximum.reduce([np.linalg.norm(v - cen, axis=1)
                                 for v in (va, vb, vc)])
        self._cen = np.ascontiguousarray(cen)
        self._crad = np.ascontiguousarray(rad * (1.0 + 1e-12) + 1e-12)
        # plain python lists: the per-tick query path stays on float scalars
        self._tri_rows = [(int(t[0]), int(t[1]), int(t[2])) for t in tri]
        self._vn_rows = [(float(n[0]), float(n[1]), float(n[2]))
                         for n in mesh.vertex_normals]
        self._patch_rows = [int(p) for p in mesh.patch_ids]

    def query(self, px: float, py: float, pz: float) -> SurfaceQuery:
        idx, cx, cy, cz, b0, b1, b2 = _kernels.mesh_nearest(
            px, py, pz, self._a, self._ab, self._ac, self._cen, self._crad)
        i0, i1, i2 = self._tri_rows[idx]
        n0, n1, n2 = self._vn_rows[i0], self._vn_rows[i1], self._vn_rows[i2]
        nx = b0 * n0[0] + b1 * n1[0] + b2 * n2[0]
        ny = b0 * n0[1] + b1 * n1[1] + b2 * n2[1]
        nz = b0 * n0[2] + b1 * n1[2] + b2 * n2[2]
        nn = math.sqrt(nx * nx + ny * ny + nz * nz)
        nx, ny, nz = nx / nn, ny / nn, nz / nn
        dx, dy, dz = px - cx, py - cy, pz - cz
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dx * nx + dy * ny + dz * nz < 0.0:
            dist = -dist
        return SurfaceQuery((cx, cy, cz), (nx, ny, nz), dist,
                            int(idx), self._patch_rows[idx])

    def query_batch(self, points: np.ndarray):
        """(idx, cp, bary) arrays for (N, 3) query points."""
        pts = np.ascontiguousarray(points, dtype=np.float64)
        return _kernels.mesh_nearest_batch(pts, self._a, self._ab, self._ac,
                                           self._cen, self._crad)


# -- external mesh format ---------------------------------------------------
#
# Text form:
#   palpmesh v1 text
#   <vertex_count> <triangle_count> <patch_count>
#   x y z nx ny nz            (vertex_count lines, mm / unit normal)
#   i j k patch               (triangle_count lines)
#
# Binary form (little-endian):
#   "palpmesh v1 bin\n" then uint32 counts (nv, nt, np),
#   nv * 6 float64 vertex records, nt * 4 int32 triangle records.


def write_palpmesh(path: str | Path, mesh: SurfaceMesh, binary: bool = False) -> None:
    path = Path(path)
    if binary:
        with open(path, "wb") as fh:
            fh.write(b"palpmesh v1 bin\n")
            fh.write(struct.pack("<III", mesh.vertex_count, mesh.triangle_count,
                                 mesh.patch_count))
            rec = np.hstack([mesh.vertices, mesh.vertex_normals]).astype("<f8")
            fh.write(rec.tobytes())
            tri = np.hstack([mesh.triangles, mesh.patch_ids[:, None]]).astype("<i4")
            fh.write(tri.tobytes())
        return
    lines = ["palpmesh v1 text",
             f"{mesh.vertex_count} {mesh.triangle_count} {mesh.patch_count}"]
    for v, n in zip(mesh.vertices.tolist(), mesh.vertex_normals.tolist()):
        lines.append(f"{v[0]!r} {v[1]!r} {v[2]!r} {n[0]!r} {n[1]!r} {n[2]!r}")
    for t, p in zip(mesh.triangles.tolist(), mesh.patch_ids.tolist()):
        lines.append(f"{t[0]} {t[1]} {t[2]} {p}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_palpmesh(path: str | Path) -> SurfaceMesh:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8", errors="replace").rstrip("\n")
        if not header.startswith(MESH_MAGIC):
            raise MeshFormatError(f"{path}: not a {MESH_MAGIC} file")
        if header.endswith("bin"):
            raw = fh.read(12)
            if len(raw) < 12:
                raise MeshFormatError(f"{path}: truncated header")
            nv, nt, npatch = struct.unpack("<III", raw)
            vdata = fh.read(nv * 6 * 8)
            tdata = fh.read(nt * 4 * 4)
            if len(vdata) < nv * 48 or len(tdata) < nt * 16:
                raise MeshFormatError(f"{path}: truncated body")
            rec = np.frombuffer(vdata, dtype="<f8").reshape(nv, 6)
            tri = np.frombuffer(tdata, dtype="<i4").reshape(nt, 4)
            mesh = SurfaceMesh(rec[:, :3].copy(), tri[:, :3].copy(),
                               tri[:, 3].copy(), npatch, rec[:, 3:].copy())
        elif header.endswith("text"):
            text = fh.read().decode("utf-8").splitlines()
            if not text:
                raise MeshFormatError(f"{path}: missing counts line")
            try:
                nv, nt, npatch = (int(x) for x in text[0].split())
            except ValueError:
                raise MeshFormatError(f"{path}: bad counts line") from None
            if len(text) < 1 + nv + nt:
                raise MeshFormatError(f"{path}: truncated body")
            vrec = np.array([[float(x) for x in text[1 + i].split()]
                             for i in range(nv)], dtype=np.float64)
            trec = np.array([[int(x) for x in text[1 + nv + i].split()]
                             for i in range(nt)], dtype=np.int32)
            if vrec.shape[1] != 6 or trec.shape[1] != 4:
                raise MeshFormatError(f"{path}: bad record width")
            mesh = SurfaceMesh(vrec[:, :3], trec[:, :3], trec[:, 3], npatch,
                               vrec[:, 3:])
        else:
            raise MeshFormatError(f"{path}: unknown {MESH_MAGIC} variant")
    mesh.validate()
    return mesh
