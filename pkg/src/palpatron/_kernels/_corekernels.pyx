# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Scalar twin of ``_backend_numpy``; see the note there about bit-identical
operation order.  Compiled with -ffp-contract=off so no FMA contraction can
perturb the doubles relative to the numpy path.
"""

import numpy as np

from libc.math cimport exp, sqrt

NAME = "compiled"


cdef inline double _d3(double ux, double uy, double uz,
                       double vx, double vy, double vz) nogil:
    return ux * vx + uy * vy + uz * vz


cdef void _closest_one(double qx, double qy, double qz,
                       double ax, double ay, double az,
                       double abx, double aby, double abz,
                       double acx, double acy, double acz,
                       double* out) nogil:
    """Closest point on one triangle; out = [cpx, cpy, cpz, b0, b1, b2].

    Ericson voronoi-region cascade, same region priority and arithmetic as
    the numpy twin.
    """
    cdef double apx = qx - ax, apy = qy - ay, apz = qz - az
    cdef double d1 = _d3(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _d3(acx, acy, acz, apx, apy, apz)
    cdef double bx = ax + abx, by = ay + aby, bz = az + abz
    cdef double bpx = qx - bx, bpy = qy - by, bpz = qz - bz
    cdef double d3 = _d3(abx, aby, abz, bpx, bpy, bpz)
    cdef double d4 = _d3(acx, acy, acz, bpx, bpy, bpz)
    cdef double cx = ax + acx, cy = ay + acy, cz = az + acz
    cdef double cpx_ = qx - cx, cpy_ = qy - cy, cpz_ = qz - cz
    cdef double d5 = _d3(abx, aby, abz, cpx_, cpy_, cpz_)
    cdef double d6 = _d3(acx, acy, acz, cpx_, cpy_, cpz_)
    cdef double vc = d1 * d4 - d3 * d2
    cdef double vb = d5 * d2 - d1 * d6
    cdef double va = d3 * d6 - d5 * d4
    cdef double v, w, denom

    if d1 <= 0.0 and d2 <= 0.0:
        out[0] = ax; out[1] = ay; out[2] = az
        out[3] = 1.0; out[4] = 0.0; out[5] = 0.0
        return
    if d3 >= 0.0 and d4 <= d3:
        out[0] = bx; out[1] = by; out[2] = bz
        out[3] = 0.0; out[4] = 1.0; out[5] = 0.0
        return
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0] = ax + v * abx; out[1] = ay + v * aby; out[2] = az + v * abz
        out[3] = 1.0 - v; out[4] = v; out[5] = 0.0
        return
    if d6 >= 0.0 and d5 <= d6:
        out[0] = cx; out[1] = cy; out[2] = cz
        out[3] = 0.0; out[4] = 0.0; out[5] = 1.0
        return
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0] = ax + w * acx; out[1] = ay + w * acy; out[2] = az + w * acz
        out[3] = 1.0 - w; out[4] = 0.0; out[5] = w
        return
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = bx + w * (acx - abx)
        out[1] = by + w * (acy - aby)
        out[2] = bz + w * (acz - abz)
        out[3] = 0.0; out[4] = 1.0 - w; out[5] = w
        return
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = (ax + abx * v) + acx * w
    out[1] = (ay + aby * v) + acy * w
    out[2] = (az + abz * v) + acz * w
    out[3] = 1.0 - v - w; out[4] = v; out[5] = w


cdef int _exact(double qx, double qy, double qz,
                double[:, ::1] tri_a, double[:, ::1] tri_ab,
                double[:, ::1] tri_ac, int i, double* buf,
                double* d2_out) nogil:
    cdef double dx, dy, dz
    _closest_one(qx, qy, qz,
                 tri_a[i, 0], tri_a[i, 1], tri_a[i, 2],
                 tri_ab[i, 0], tri_ab[i, 1], tri_ab[i, 2],
                 tri_ac[i, 0], tri_ac[i, 1], tri_ac[i, 2], buf)
    dx = qx - buf[0]
    dy = qy - buf[1]
    dz = qz - buf[2]
    d2_out[0] = dx * dx + dy * dy + dz * dz
    return 0


cdef int _nearest(double qx, double qy, double qz,
                  double[:, ::1] tri_a, double[:, ::1] tri_ab,
                  double[:, ::1] tri_ac, double[:, ::1] cen,
                  double[::1] crad, double* best) nogil:
    """Exact nearest triangle with a centroid-bound prune.

    A triangle is skipped only when dist(q, centroid) - bound_radius is
    strictly greater than the best exact distance so far, which can never
    hide a minimum or an index-breaking tie.  The scan seeds from the
    triangle with the closest centroid so the prune bites immediately.
    The result (including lowest-index tie-break) is identical to the
    full argmin scan in the numpy twin.
    """
    cdef int t = tri_a.shape[0]
    cdef int i, seed = 0, best_i
    cdef double buf[6]
    cdef double dx, dy, dz, dc2, d2, lim
    cdef double best_c = 1e300, best_d2
    cdef int k

    for i in range(t):
        dx = qx - cen[i, 0]
        dy = qy - cen[i, 1]
        dz = qz - cen[i, 2]
        dc2 = dx * dx + dy * dy + dz * dz
        if dc2 < best_c:
            best_c = dc2
            seed = i

    _exact(qx, qy, qz, tri_a, tri_ab, tri_ac, seed, buf, &best_d2)
    best_i = seed
    for k in range(6):
        best[k] = buf[k]
    cdef double s = sqrt(best_d2)

    for i in range(t):
        dx = qx - cen[i, 0]
        dy = qy - cen[i, 1]
        dz = qz - cen[i, 2]
        dc2 = dx * dx + dy * dy + dz * dz
        lim = s + crad[i]
        if dc2 > lim * lim:
            continue
        _exact(qx, qy, qz, tri_a, tri_ab, tri_ac, i, buf, &d2)
        if d2 < best_d2 or (d2 == best_d2 and i < best_i):
            best_d2 = d2
            best_i = i
            for k in range(6):
                best[k] = buf[k]
            s = sqrt(best_d2)
    return best_i


def mesh_nearest(double qx, double qy, double qz,
                 double[:, ::1] tri_a, double[:, ::1] tri_ab,
                 double[:, ::1] tri_ac, double[:, ::1] cen,
                 double[::1] crad):
    """Nearest point on a triangle soup to one query point."""
    cdef double best[6]
    cdef int idx
    with nogil:
        idx = _nearest(qx, qy, qz, tri_a, tri_ab, tri_ac, cen, crad, best)
    return idx, best[0], best[1], best[2], best[3], best[4], best[5]


def mesh_nearest_batch(double[:, ::1] queries, double[:, ::1] tri_a,
                       double[:, ::1] tri_ab, double[:, ::1] tri_ac,
                       double[:, ::1] cen, double[::1] crad):
    """Vector form of :func:`mesh_nearest` over (N, 3) queries."""
    cdef int n = queries.shape[0]
    idx_arr = np.empty(n, dtype=np.int64)
    cps = np.empty((n, 3), dtype=np.float64)
    barys = np.empty((n, 3), dtype=np.float64)
    cdef long long[::1] idx_v = idx_arr
    cdef double[:, ::1] cps_v = cps
    cdef double[:, ::1] barys_v = barys
    cdef double best[6]
    cdef int i
    with nogil:
        for i in range(n):
            idx_v[i] = _nearest(queries[i, 0], queries[i, 1], queries[i, 2],
                                tri_a, tri_ab, tri_ac, cen, crad, best)
            cps_v[i, 0] = best[0]
            cps_v[i, 1] = best[1]
            cps_v[i, 2] = best[2]
            barys_v[i, 0] = best[3]
            barys_v[i, 1] = best[4]
            barys_v[i, 2] = best[5]
    return idx_arr, cps, barys


def gauss_sum(double px, double py, double pz, double[:, ::1] centers,
              double[::1] inv_two_sigma2, double[::1] amps,
              double[::1] cutoff_r2):
    """Sum of truncated gaussian bumps at one point (see numpy twin)."""
    cdef double acc = 0.0
    cdef double dx, dy, dz, r2
    cdef int i
    with nogil:
        for i in range(centers.shape[0]):
            dx = px - centers[i, 0]
            dy = py - centers[i, 1]
            dz = pz - centers[i, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 <= cutoff_r2[i]:
                acc += amps[i] * exp(-r2 * inv_two_sigma2[i])
    return acc
