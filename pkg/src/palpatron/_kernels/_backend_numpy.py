"""Pure numpy/python kernel backend.

Mirror of ``_corekernels.pyx``.  Both backends must produce bit-identical
doubles: the servo loop's outputs are recorded and replay-verified byte for
byte, so the two implementations keep the exact same floating-point
operation order (dot products accumulate x, then y, then z; feature fields
accumulate in index order; ``exp`` is libm's in both).  Do not "simplify"
an expression here without changing the Cython twin the same way.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "numpy"


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # (x + y) + z, matching the scalar accumulation in the compiled twin
    return u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] + u[:, 2] * v[:, 2]


def _closest_on_triangles(q: np.ndarray, tri_a: np.ndarray, tri_ab: np.ndarray,
                          tri_ac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest point to ``q`` on every triangle (a, a+ab, a+ac).

    Returns (cp, bary) with shapes (T, 3).  Voronoi-region cascade after
    Ericson; regions are selected in the same priority order as the
    compiled scalar version, so the arithmetic per triangle is identical.
    """
    ap = q[None, :] - tri_a
    d1 = _dot(tri_ab, ap)
    d2 = _dot(tri_ac, ap)

    b = tri_a + tri_ab
    bp = q[None, :] - b
    d3 = _dot(tri_ab, bp)
    d4 = _dot(tri_ac, bp)

    c = tri_a + tri_ac
    cp_ = q[None, :] - c
    d5 = _dot(tri_ab, cp_)
    d6 = _dot(tri_ac, cp_)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v_in = vb * denom
        w_in = vc * denom

    r1 = (d1 <= 0.0) & (d2 <= 0.0)
    r2 = (d3 >= 0.0) & (d4 <= d3)
    r3 = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    r4 = (d6 >= 0.0) & (d5 <= d6)
    r5 = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    r6 = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    conds = [r1, r2, r3, r4, r5, r6]

    cp = np.empty_like(tri_a)
    bary = np.empty_like(tri_a)
    for k in range(3):
        cp[:, k] = np.select(
            conds,
            [
                tri_a[:, k],
                b[:, k],
                tri_a[:, k] + v_ab * tri_ab[:, k],
                c[:, k],
                tri_a[:, k] + w_ac * tri_ac[:, k],
                b[:, k] + w_bc * (tri_ac[:, k] - tri_ab[:, k]),
            ],
            default=(tri_a[:, k] + tri_ab[:, k] * v_in) + tri_ac[:, k] * w_in,
        )
    bary[:, 0] = np.select(
        conds, [1.0, 0.0, 1.0 - v_ab, 0.0, 1.0 - w_ac, 0.0],
        default=1.0 - v_in - w_in,
    )
    bary[:, 1] = np.select(
        conds, [0.0, 1.0, v_ab, 0.0, 0.0, 1.0 - w_bc], default=v_in,
    )
    bary[:, 2] = np.select(
        conds, [0.0, 0.0, 0.0, 1.0, w_ac, w_bc], default=w_in,
    )
    return cp, bary


def mesh_nearest(qx: float, qy: float, qz: float, tri_a: np.ndarray,
                 tri_ab: np.ndarray, tri_ac: np.ndarray,
                 cen: np.ndarray, crad: np.ndarray):
    """Nearest point on a triangle soup to one query point.

    Returns (triangle index, cpx, cpy, cpz, b0, b1, b2).  Ties in squared
    distance resolve to the lowest triangle index.  ``cen``/``crad`` (the
    compiled twin's prune bounds) are accepted but unused: the full scan's
    first-minimum argmin picks the same triangle the pruned scan does.
    """
    q = np.array([qx, qy, qz], dtype=np.float64)
    cp, bary = _closest_on_triangles(q, tri_a, tri_ab, tri_ac)
    dx = qx - cp[:, 0]
    dy = qy - cp[:, 1]
    dz = qz - cp[:, 2]
    d2 = dx * dx + dy * dy + dz * dz
    idx = int(np.argmin(d2))  # first minimum: lowest index wins ties
    return (idx, float(cp[idx, 0]), float(cp[idx, 1]), float(cp[idx, 2]),
            float(bary[idx, 0]), float(bary[idx, 1]), float(bary[idx, 2]))


def mesh_nearest_batch(queries: np.ndarray, tri_a: np.ndarray,
                       tri_ab: np.ndarray, tri_ac: np.ndarray,
                       cen: np.ndarray, crad: np.ndarray):
    """Vector form of :func:`mesh_nearest` over (N, 3) queries."""
    n = queries.shape[0]
    idx = np.empty(n, dtype=np.int64)
    cps = np.empty((n, 3), dtype=np.float64)
    barys = np.empty((n, 3), dtype=np.float64)
    for i in range(n):
        r = mesh_nearest(queries[i, 0], queries[i, 1], queries[i, 2],
                         tri_a, tri_ab, tri_ac, cen, crad)
        idx[i] = r[0]
        cps[i] = r[1:4]
        barys[i] = r[4:7]
    return idx, cps, barys


def gauss_sum(px: float, py: float, pz: float, centers: np.ndarray,
              inv_two_sigma2: np.ndarray, amps: np.ndarray,
              cutoff_r2: np.ndarray) -> float:
    """Sum of truncated gaussian bumps at one point.

    Features contribute ``amp * exp(-r^2 * inv_two_sigma2)`` and are cut to
    exactly zero beyond ``cutoff_r2`` (squared radius).  Accumulation is
    sequential in feature order with libm ``exp`` for backend parity.
    """
    acc = 0.0
    for i in range(centers.shape[0]):
        dx = px - centers[i, 0]
        dy = py - centers[i, 1]
        dz = pz - centers[i, 2]
        r2 = dx * dx + dy * dy + dz * dz
        if r2 <= cutoff_r2[i]:
            acc += amps[i] * math.exp(-r2 * inv_two_sigma2[i])
    return acc
