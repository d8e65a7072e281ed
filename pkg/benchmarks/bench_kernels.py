"""Timing harness for the two line_hits backends.

Compares the numpy fallback against the compiled Cython kernel on random
triangle soups, including one sized like the collision detector's actual
per-call workload (about a dozen anchors against a 208-triangle part).
Run as: python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from emogen._kernels import pure

try:
    from emogen._kernels import _raycast as compiled
except ImportError:
    compiled = None

# (anchors, triangles): rig-scale first, then synthetic scaling steps
SIZES = [(12, 208), (50, 1000), (200, 5000), (1000, 20000)]


def make_soup(rng, n_anchor, n_tri):
    base = rng.uniform(-1, 1, size=(n_tri, 3))
    b = base + rng.uniform(-0.8, 0.8, size=(n_tri, 3))
    c = base + rng.uniform(-0.8, 0.8, size=(n_tri, 3))
    origins = rng.uniform(-1, 1, size=(n_anchor, 3))
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    return origins, d, base, b, c


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    if compiled is None:
        print("compiled kernel not built; run pip install -e . --no-build-isolation")
        return

    rng = np.random.default_rng(args.seed)
    print(f"{'anchors x tris':>16} {'pure ms':>10} {'compiled ms':>12} {'speedup':>8} {'hits':>7}")
    for n_anchor, n_tri in SIZES:
        soup = make_soup(rng, n_anchor, n_tri)
        tp, rp = best_of(pure.line_hits, soup, args.repeats)
        tc, rc = best_of(compiled.line_hits, soup, args.repeats)
        if len(rp[0]) != len(rc[0]):
            raise SystemExit(f"backend disagreement at {n_anchor}x{n_tri}: "
                             f"{len(rp[0])} vs {len(rc[0])} hits")
        print(f"{n_anchor:>7} x {n_tri:<6} {tp * 1e3:>10.3f} {tc * 1e3:>12.3f} "
              f"{tp / tc:>7.1f}x {len(rp[0]):>7}")


if __name__ == "__main__":
    main()
