"""Backend micro-benchmark: compiled core vs numpy fallback.

Run as ``python -m landau_dsmc.bench``.  Exercises the collision hot loops
on representative workloads and reports timings plus the per-collision
agreement between the two implementations.
"""

from __future__ import annotations

import time

import numpy as np

from . import rng
from ._backend import _pure
from .kinetics import KernelSpec

try:
    from ._backend import _corecy
except ImportError:
    _corecy = None


def _workload(n, n_coll, seed, disjoint):
    a, b = rng.normal_pairs(seed, rng.STEP_INIT, np.arange(n), 0)
    c, _ = rng.normal_pairs(seed, rng.STEP_INIT, np.arange(n), 2)
    v = np.ascontiguousarray(np.column_stack([a, b, c]))
    if disjoint:
        keys = rng.uniforms(seed, 0, np.arange(n), 0)
        perm = np.argsort(keys).astype(np.int64)
        half = min(n_coll, n // 2)
        i, j = perm[:half], perm[half:2 * half]
    else:
        u_i = rng.uniforms(seed, 0, np.arange(n_coll), 0)
        u_j = rng.uniforms(seed, 0, np.arange(n_coll), 1)
        i = np.minimum((u_i * n).astype(np.int64), n - 1)
        j = np.minimum((u_j * (n - 1)).astype(np.int64), n - 2)
        j += (j >= i).astype(np.int64)
    m = i.size
    r1 = rng.uniforms(seed, 0, np.arange(m), 2)
    r2 = rng.uniforms(seed, 0, np.arange(m), 3)
    return v, i, j, r1, r2


def _time(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    if _corecy is None:
        print("compiled core unavailable; only the numpy fallback is present")
    cases = [
        ("nb batch 5e4 pairs", "nb_collide_batch", 100_000, 50_000, True),
        ("bird chain 1e5 collisions", "bird_chain", 100_000, 100_000, False),
    ]
    print(f"{'case':34s} {'kernel':16s} {'numpy':>10s} {'cython':>10s} "
          f"{'speedup':>8s} {'max |dv|':>10s}")
    for label, fn_name, n, n_coll, disjoint in cases:
        for surrogate, interaction in (("tanh", "coulomb"), ("exp", "maxwell")):
            spec = KernelSpec(surrogate, interaction, epsilon=0.1)
            v, i, j, r1, r2 = _workload(n, n_coll, 7, disjoint)
            v_py = v.copy()
            t_py = _time(getattr(_pure, fn_name), v_py, i, j, r1, r2, spec)
            if _corecy is None:
                print(f"{label:34s} {surrogate}-{interaction:9s} {t_py:9.3f}s"
                      f" {'-':>10s} {'-':>8s} {'-':>10s}")
                continue
            v_cy = v.copy()
            t_cy = _time(getattr(_corecy, fn_name), v_cy, i, j, r1, r2, spec)
            # one final application of each to compare end states
            dv = np.abs(v_py - v_cy).max()
            print(f"{label:34s} {surrogate}-{interaction:9s} {t_py:9.3f}s "
                  f"{t_cy:9.3f}s {t_py / t_cy:7.1f}x {dv:10.2e}")
    taus = np.geomspace(1e-6, 10, 200_000)
    t_py = _time(_pure.solve_A_array, taus)
    if _corecy is not None:
        t_cy = _time(_corecy.solve_A_array, taus)
        print(f"{'solve_A 2e5 values':34s} {'exp':16s} {t_py:9.3f}s "
              f"{t_cy:9.3f}s {t_py / t_cy:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
