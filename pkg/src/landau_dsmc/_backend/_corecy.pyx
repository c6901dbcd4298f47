# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled collision kernels: pair-batch transform and sequential Bird chain.

Formula-for-formula mirror of the numpy fallback; see ``_pure.py``.  The
scalar loops dominate the deterministic runs, so this module is where the
hot time goes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport (M_PI, cos, exp, expm1, fabs, fmax, fmin, isinf, log1p,
                        sin, sinh, sqrt, tanh)

cnp.import_array()

BACKEND_NAME = "cython"

cdef double _ETA_AXIS = 1e-12
cdef int SURR_EXP = 0
cdef int SURR_LINEAR = 1
cdef int SURR_TANH = 2


cdef inline double _langevin(double a) nogil:
    if a < 1e-3:
        return a / 3.0 - a * a * a / 45.0
    return 1.0 / tanh(a) - 1.0 / a


cdef inline double _langevin_deriv(double a) nogil:
    cdef double s
    if a < 1e-3:
        return 1.0 / 3.0 - a * a / 15.0
    s = sinh(a)
    return 1.0 / (a * a) - 1.0 / (s * s)


cdef double _L35 = _langevin(35.0)


cdef double _solve_A_scalar(double t) nogil:
    cdef double y = exp(-2.0 * t)
    cdef double x, g, lo, hi, xn
    cdef int it
    if y >= _L35:
        # 1 - y = -expm1(-2 t) avoids the cancellation at tiny t
        return -1.0 / expm1(-2.0 * t)
    x = y * (3.0 - y * y) / (1.0 - y * y)
    lo = 1e-8
    hi = 40.0
    for it in range(80):
        g = _langevin(x) - y
        if fabs(g) < 1e-12:
            break
        if g > 0.0:
            hi = fmin(hi, x)
        else:
            lo = fmax(lo, x)
        xn = x - g / _langevin_deriv(x)
        if not (lo < xn < hi) or xn != xn:
            xn = 0.5 * (lo + hi)
        x = xn
    return fmax(x, 1e-300)


cdef inline double _cos_theta(int surrogate, double t, double r1) nogil:
    cdef double c, a
    if surrogate == SURR_TANH:
        c = 1.0 - 2.0 * tanh(t)
    elif surrogate == SURR_LINEAR:
        c = 1.0 - 2.0 * t if t <= 1.0 else -1.0
    else:
        a = _solve_A_scalar(t)
        if isinf(a):
            c = 1.0
        else:
            c = 1.0 + log1p((1.0 - r1) * expm1(-2.0 * a)) / a
    return fmin(1.0, fmax(-1.0, c))


cdef inline void _collide_one(double[:, ::1] v, Py_ssize_t a, Py_ssize_t b,
                              double c, double s, double phi) nogil:
    """Apply the collision transform to particles a, b (|q| > 0 ensured)."""
    cdef double qx = v[a, 0] - v[b, 0]
    cdef double qy = v[a, 1] - v[b, 1]
    cdef double qz = v[a, 2] - v[b, 2]
    cdef double qn = sqrt(qx * qx + qy * qy + qz * qz)
    cdef double qperp = sqrt(qy * qy + qz * qz)
    cdef double cp = cos(phi)
    cdef double sp = sin(phi)
    cdef double hx, hy, hz, wx, wy, wz, dx, dy, dz, omc
    if qperp < _ETA_AXIS * qn:
        # cyclic frame (x,y,z)->(y,z,x), apply, rotate back
        qperp = sqrt(qz * qz + qx * qx)
        wx = qperp * cp
        wy = -(qz * qy * cp + qn * qx * sp) / qperp
        wz = -(qx * qy * cp - qn * qz * sp) / qperp
        hx = wz
        hy = wx
        hz = wy
    else:
        hx = qperp * cp
        hy = -(qy * qx * cp + qn * qz * sp) / qperp
        hz = -(qz * qx * cp - qn * qy * sp) / qperp
    omc = 1.0 - c
    dx = 0.5 * (qx * omc + hx * s)
    dy = 0.5 * (qy * omc + hy * s)
    dz = 0.5 * (qz * omc + hz * s)
    v[a, 0] -= dx
    v[a, 1] -= dy
    v[a, 2] -= dz
    v[b, 0] += dx
    v[b, 1] += dy
    v[b, 2] += dz


cdef (Py_ssize_t, Py_ssize_t) _chain(double[:, ::1] v,
                                     cnp.int64_t[::1] idx_i,
                                     cnp.int64_t[::1] idx_j,
                                     double[::1] r1, double[::1] r2,
                                     int surrogate, bint maxwell,
                                     double pref, double q_floor) nogil:
    cdef Py_ssize_t m, a, b
    cdef Py_ssize_t n_skip = 0, n_clamp = 0
    cdef double qx, qy, qz, qn, t, c, s
    for m in range(idx_i.shape[0]):
        a = idx_i[m]
        b = idx_j[m]
        qx = v[a, 0] - v[b, 0]
        qy = v[a, 1] - v[b, 1]
        qz = v[a, 2] - v[b, 2]
        qn = sqrt(qx * qx + qy * qy + qz * qz)
        if qn == 0.0:
            n_skip += 1
            continue
        if maxwell:
            t = pref
        else:
            if qn < q_floor:
                n_clamp += 1
                qn = q_floor
            t = pref / (qn * qn * qn)
        c = _cos_theta(surrogate, t, r1[m])
        s = sqrt(fmax(0.0, 1.0 - c * c))
        _collide_one(v, a, b, c, s, 2.0 * M_PI * r2[m])
    return n_skip, n_clamp


cdef int _surrogate_id(spec) except -1:
    name = spec.surrogate
    if name == "exp":
        return SURR_EXP
    if name == "linear":
        return SURR_LINEAR
    if name == "tanh":
        return SURR_TANH
    raise ValueError(f"unknown surrogate {name!r}")


def nb_collide_batch(double[:, ::1] v, idx_i, idx_j, r1, r2, spec):
    """Collide disjoint pairs in place; returns (n_skipped, n_qfloor_clamped)."""
    cdef cnp.int64_t[::1] ii = np.ascontiguousarray(idx_i, dtype=np.int64)
    cdef cnp.int64_t[::1] jj = np.ascontiguousarray(idx_j, dtype=np.int64)
    cdef double[::1] u1 = np.ascontiguousarray(r1, dtype=np.float64)
    cdef double[::1] u2 = np.ascontiguousarray(r2, dtype=np.float64)
    cdef int surr = _surrogate_id(spec)
    cdef bint maxwell = spec.interaction == "maxwell"
    cdef double pref = spec.tau0_prefactor
    cdef double q_floor = spec.q_floor
    cdef Py_ssize_t ns, nc
    with nogil:
        ns, nc = _chain(v, ii, jj, u1, u2, surr, maxwell, pref, q_floor)
    return ns, nc


def bird_chain(double[:, ::1] v, idx_i, idx_j, r1, r2, spec):
    """Sequential collision chain (recollisions allowed); same surface as above."""
    return nb_collide_batch(v, idx_i, idx_j, r1, r2, spec)


def solve_A_array(tau0_val):
    """Vector Langevin inversion matching kinetics.solve_A."""
    arr = np.ascontiguousarray(np.atleast_1d(tau0_val), dtype=np.float64)
    if np.any(arr <= 0):
        raise ValueError("solve_A requires tau0 > 0 (A diverges at tau0 = 0)")
    cdef double[::1] t = arr
    out = np.empty_like(arr)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(t.shape[0]):
            o[k] = _solve_A_scalar(t[k])
    return out
