"""Pure-numpy collision kernels (fallback backend).

Same call surface as the compiled core.  The Nanbu-Babovsky batch is fully
vectorized (pairs within a step are disjoint).  The Bird chain is sequential
by nature; here it is applied in maximal conflict-free segments, which is
arithmetically identical because disjoint collisions commute.
"""

from __future__ import annotations

import numpy as np

from .. import kinetics

BACKEND_NAME = "numpy"


def nb_collide_batch(v, idx_i, idx_j, r1, r2, spec) -> tuple[int, int]:
    """Collide disjoint pairs (idx_i[m], idx_j[m]) in place.

    Returns ``(n_skipped, n_qfloor_clamped)``: pairs with |q| = 0 are
    skipped, coulomb pairs below the |q| floor are counted.
    """
    q = v[idx_i] - v[idx_j]
    qn = np.sqrt(np.sum(q * q, axis=-1))
    alive = qn > 0.0
    n_skip = int(qn.size - np.count_nonzero(alive))
    if n_skip:
        idx_i, idx_j = idx_i[alive], idx_j[alive]
        q, qn, r1, r2 = q[alive], qn[alive], r1[alive], r2[alive]
        if qn.size == 0:
            return n_skip, 0
    n_clamp = 0
    if spec.interaction == "coulomb":
        n_clamp = int(np.count_nonzero(qn < spec.q_floor))
    t0 = kinetics.tau0(spec, qn)
    ang = kinetics.sample_angles(spec, t0, r1, r2)
    c = np.asarray(ang.cos_theta)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    h = kinetics.h_vector(q, ang.phi)
    d = 0.5 * (q * (1.0 - c)[:, None] + h * s[:, None])
    v[idx_i] -= d
    v[idx_j] += d
    return n_skip, n_clamp


def bird_chain(v, idx_i, idx_j, r1, r2, spec) -> tuple[int, int]:
    """Apply a recollision-allowed collision sequence in order, in place."""
    n = idx_i.size
    n_skip = n_clamp = 0
    pos = 0
    while pos < n:
        seen = set()
        end = pos
        while end < n:
            a = int(idx_i[end])
            b = int(idx_j[end])
            if a in seen or b in seen:
                break
            seen.add(a)
            seen.add(b)
            end += 1
        s1, s2 = nb_collide_batch(
            v, idx_i[pos:end], idx_j[pos:end], r1[pos:end], r2[pos:end], spec
        )
        n_skip += s1
        n_clamp += s2
        pos = end
    return n_skip, n_clamp


def solve_A_array(tau0_val):
    return kinetics.solve_A(np.asarray(tau0_val, dtype=np.float64))
