"""Vectorized line/triangle intersection (numpy fallback backend).

Batched Moller-Trumbore over anchors x triangles. Lines are parameterised
as origin + t * direction with t signed, so one call serves both the
positive and negative sampling rays of the collision detector.
"""

import numpy as np

# barycentric slack; triangles whose plane is parallel to the line are a miss
BARY_EPS = 1e-9
DET_EPS = 1e-12


def line_hits(origins, direction, tri_a, tri_b, tri_c):
    """All intersections of each anchor line with a triangle soup.

    origins: (A, 3); direction: (3,); tri_*: (T, 3) triangle corners.
    Returns (anchor_idx, tri_idx, t, orient), flat arrays of equal length.
    orient is +1 where the triangle normal points along the line direction,
    -1 where it points against it.
    """
    origins = np.asarray(origins, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    e1 = tri_b - tri_a
    e2 = tri_c - tri_a
    pvec = np.cross(d, e2)                       # (T, 3)
    det = np.einsum("tj,tj->t", e1, pvec)        # (T,)
    ok = np.abs(det) > DET_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = np.where(ok, 1.0 / det, 0.0)
        tvec = origins[:, None, :] - tri_a[None, :, :]          # (A, T, 3)
        u = np.einsum("atj,tj->at", tvec, pvec) * inv_det
        qvec = np.cross(tvec, e1[None, :, :])                   # (A, T, 3)
        v = np.einsum("atj,j->at", qvec, d) * inv_det
        t = np.einsum("atj,tj->at", qvec, e2) * inv_det
    hit = ok[None, :] & (u >= -BARY_EPS) & (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    ai, ti = np.nonzero(hit)
    # dot(normal, d) = dot(cross(e1, e2), d) = -det
    orient = np.where(det[ti] < 0.0, 1, -1).astype(np.int8)
    return ai, ti, t[ai, ti], orient
