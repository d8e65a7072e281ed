"""Ray-cast kernel: geometry cases and compiled/pure backend parity."""

import numpy as np
import pytest

from emogen._kernels import BACKEND, line_hits
from emogen._kernels import pure

try:
    from emogen._kernels import _raycast as compiled
except ImportError:
    compiled = None


def unit_triangle(z=0.0):
    a = np.array([[0.0, 0.0, z]])
    b = np.array([[1.0, 0.0, z]])
    c = np.array([[0.0, 1.0, z]])
    return a, b, c


def test_single_hit_distance_and_orientation():
    a, b, c = unit_triangle(z=2.0)
    origins = np.array([[0.2, 0.2, 0.0]])
    ai, ti, t, orient = line_hits(origins, np.array([0.0, 0.0, 1.0]), a, b, c)
    assert list(ai) == [0] and list(ti) == [0]
    assert t[0] == pytest.approx(2.0, abs=1e-12)
    # normal of (a,b,c) is +z here, along the ray direction
    assert orient[0] == 1


def test_signed_t_for_hits_behind_origin():
    a, b, c = unit_triangle(z=-3.0)
    origins = np.array([[0.2, 0.2, 0.0]])
    ai, ti, t, orient = line_hits(origins, np.array([0.0, 0.0, 1.0]), a, b, c)
    assert len(ai) == 1
    assert t[0] == pytest.approx(-3.0, abs=1e-12)


def test_orientation_flips_with_winding():
    a, b, c = unit_triangle(z=1.0)
    origins = np.array([[0.2, 0.2, 0.0]])
    d = np.array([0.0, 0.0, 1.0])
    _, _, _, o_ccw = line_hits(origins, d, a, b, c)
    _, _, _, o_cw = line_hits(origins, d, a, c, b)  # reversed winding
    assert o_ccw[0] == -o_cw[0]


def test_miss_outside_triangle():
    a, b, c = unit_triangle()
    origins = np.array([[0.9, 0.9, -1.0]])  # outside the u+v <= 1 half
    ai, _, _, _ = line_hits(origins, np.array([0.0, 0.0, 1.0]), a, b, c)
    assert len(ai) == 0


def test_parallel_line_is_a_miss():
    a, b, c = unit_triangle(z=1.0)
    origins = np.array([[0.2, 0.2, 0.0]])
    ai, _, _, _ = line_hits(origins, np.array([1.0, 0.0, 0.0]), a, b, c)
    assert len(ai) == 0


def test_multiple_anchors_multiple_triangles():
    # two stacked triangles, two anchors; every (anchor, tri) pair hits
    a = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]])
    b = np.array([[1.0, 0.0, 1.0], [1.0, 0.0, 2.0]])
    c = np.array([[0.0, 1.0, 1.0], [0.0, 1.0, 2.0]])
    origins = np.array([[0.2, 0.2, 0.0], [0.1, 0.1, 0.5]])
    ai, ti, t, _ = line_hits(origins, np.array([0.0, 0.0, 1.0]), a, b, c)
    assert len(ai) == 4
    got = {(int(i), int(j)): float(tv) for i, j, tv in zip(ai, ti, t)}
    assert got[(0, 0)] == pytest.approx(1.0)
    assert got[(0, 1)] == pytest.approx(2.0)
    assert got[(1, 0)] == pytest.approx(0.5)
    assert got[(1, 1)] == pytest.approx(1.5)


def _random_soup(rng, n_tri=40, n_anchor=15):
    base = rng.uniform(-1, 1, size=(n_tri, 3))
    a = base
    b = base + rng.uniform(-0.8, 0.8, size=(n_tri, 3))
    c = base + rng.uniform(-0.8, 0.8, size=(n_tri, 3))
    origins = rng.uniform(-1, 1, size=(n_anchor, 3))
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    return origins, d, a, b, c


@pytest.mark.skipif(compiled is None, reason="compiled kernel not built")
def test_backend_parity_on_random_soups():
    rng = np.random.default_rng(17)
    for _ in range(25):
        origins, d, a, b, c = _random_soup(rng)
        rp = pure.line_hits(origins, d, a, b, c)
        rc = compiled.line_hits(origins, d, a, b, c)
        kp = sorted(zip(rp[0].tolist(), rp[1].tolist(), rp[2].tolist(), rp[3].tolist()))
        kc = sorted(zip(rc[0].tolist(), rc[1].tolist(), rc[2].tolist(), rc[3].tolist()))
        assert len(kp) == len(kc)
        for (ai1, ti1, t1, o1), (ai2, ti2, t2, o2) in zip(kp, kc):
            assert (ai1, ti1, o1) == (ai2, ti2, o2)
            assert t1 == pytest.approx(t2, abs=1e-12)


def test_selected_backend_reported():
    assert BACKEND in ("pure", "compiled")
    if compiled is not None:
        import os

        if not os.environ.get("EMOGEN_PURE_KERNELS"):
            assert BACKEND == "compiled"
