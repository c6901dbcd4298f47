"""Polynomial-chaos representation of particle velocities and the projected
collision transform.

Each particle carries coefficient 3-vectors v_hat[k], k = 0..M, so that its
velocity at random parameter z is v(z) = sum_k v_hat[k] psi_k(z).  A physical
collision between two such particles shares a single (r1, phi) draw across
the whole z range; the z dependence enters only through tau0(z), so the
scattering cosine is a smooth function of z for smooth kernels.  Projecting
the collision law against the basis gives the coefficient-space update

    v_hat_i'[k] = v_hat_i[k] - (q_hat[k] - sum_l q_hat[l] V[l,k] + W[k]) / 2
    v_hat_j'[k] = v_hat_j[k] + (same)

with the per-pair collision matrices

    V[l,k] = sum_q w_q cos(theta(z_q)) psi_l(z_q) psi_k(z_q)
    W[k]   = sum_q w_q h(z_q) sin(theta(z_q)) psi_k(z_q).

Quadrature nodes where q(z_q) = 0 contribute the identity action.  At order
M = 0 everything collapses to a single deterministic collision and the
update is evaluated with literally the same arithmetic as kinetics.collide.

The collision log records (step, i, j, r1, r2) for every collision so that
the identical collision tree can be replayed at any expansion order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kinetics
from .basis import PolyBasis, Quadrature

__all__ = [
    "project",
    "eval_gpc",
    "CollisionMatrices",
    "collision_matrices",
    "sg_collide",
    "sg_collide_batch",
    "CollisionLog",
]

_SG_CHUNK = 16384  # pairs per block; bounds temporaries at ~chunk*n_q*(M+1)

LOG_DTYPE = np.dtype(
    [("step", "<u4"), ("i", "<u4"), ("j", "<u4"), ("r1", "<f8"), ("r2", "<f8")]
)
_LOG_MAGIC = b"LANDAU-COLLOG"


def project(samples, basis: PolyBasis, quad: Quadrature) -> np.ndarray:
    """Project node samples onto the basis: coeff[k] = sum_q w_q f(z_q) psi_k(z_q).

    ``samples`` has node values along axis -2 and components along axis -1,
    i.e. shape ``(..., n_q, 3)`` (or ``(..., n_q, 1)`` for scalars).  Returns
    shape ``(..., order + 1, 3)``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    psi = basis.table(quad.nodes)
    return np.einsum("...qd,q,qk->...kd", samples, quad.weights, psi)


def eval_gpc(coeffs, basis: PolyBasis, z):
    """Evaluate sum_k coeff[k] psi_k(z).

    ``coeffs`` has shape ``(..., order + 1, 3)``.  Scalar ``z`` gives
    ``(..., 3)``; an array of nodes gives ``(..., n_z, 3)``.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    z_arr = np.asarray(z, dtype=np.float64)
    psi = basis.table(np.atleast_1d(z_arr))
    out = np.einsum("...kd,qk->...qd", coeffs, psi)
    if z_arr.ndim == 0:
        return out[..., 0, :]
    return out


@dataclass(frozen=True)
class CollisionMatrices:
    """Per-pair Galerkin projections of cos(theta(z)) and h(z) sin(theta(z))."""

    v_hat: np.ndarray  # (M+1, M+1)
    w_hat: np.ndarray  # (M+1, 3)

    @property
    def order(self) -> int:
        return self.v_hat.shape[0] - 1


def _node_angles(q_nodes, spec, r1, phi):
    """cos, sin, h at each quadrature node for one shared (r1, phi) draw.

    ``q_nodes``: (..., n_q, 3) relative velocities at the nodes.  Nodes with
    q = 0 get the identity action (cos = 1, sin = 0, h = 0).  Returns
    (cos, sin, h, n_clamped).
    """
    q_nodes = np.asarray(q_nodes, dtype=np.float64)
    qn = np.sqrt(np.sum(q_nodes * q_nodes, axis=-1))
    alive = qn > 0.0
    n_clamp = 0
    if spec.interaction == "coulomb":
        n_clamp = int(np.count_nonzero(alive & (qn < spec.q_floor)))
    t0 = kinetics.tau0(spec, np.where(alive, qn, 1.0))
    r1b = np.broadcast_to(np.asarray(r1, dtype=np.float64)[..., None], qn.shape)
    ang = kinetics.sample_angles(spec, t0, r1b, 0.0)
    c = np.where(alive, np.asarray(ang.cos_theta), 1.0)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    h = np.zeros_like(q_nodes)
    if np.any(alive):
        phi_b = np.broadcast_to(np.asarray(phi, dtype=np.float64)[..., None], qn.shape)
        h[alive] = kinetics.h_vector(q_nodes[alive], phi_b[alive])
    return c, s, h, n_clamp


def collision_matrices(
    coeff_i,
    coeff_j,
    spec,
    r1: float,
    phi: float,
    basis: PolyBasis,
    quad: Quadrature,
) -> CollisionMatrices:
    """Build the collision matrices for one pair of coefficient vectors.

    The same (r1, phi) is used at every node: one physical collision,
    z-parameterized through tau0(z).
    """
    coeff_i = np.asarray(coeff_i, dtype=np.float64)
    coeff_j = np.asarray(coeff_j, dtype=np.float64)
    m1 = coeff_i.shape[0]
    if m1 != basis.order + 1:
        raise ValueError("coefficient count does not match basis order")
    if m1 == 1:
        # single collapsed value: deterministic angles at the k = 0 velocity
        q0 = coeff_i[0] - coeff_j[0]
        qn = float(np.sqrt(q0 @ q0))
        if qn == 0.0:
            return CollisionMatrices(np.ones((1, 1)), np.zeros((1, 3)))
        ang = kinetics.sample_angles(spec, kinetics.tau0(spec, qn), r1, 0.0)
        c = float(np.asarray(ang.cos_theta))
        s = np.sqrt(max(0.0, 1.0 - c * c))
        h = kinetics.h_vector(q0, phi)
        return CollisionMatrices(np.array([[c]]), (h * s)[None, :])
    psi = basis.table(quad.nodes)
    q_nodes = eval_gpc(coeff_i - coeff_j, basis, quad.nodes)
    c, s, h, _ = _node_angles(q_nodes, spec, np.float64(r1), np.float64(phi))
    v_hat = np.einsum("q,ql,qk->lk", quad.weights * c, psi, psi)
    w_hat = np.einsum("qd,q,qk->kd", h * s[:, None], quad.weights, psi)
    return CollisionMatrices(v_hat, w_hat)


def sg_collide(coeff_i, coeff_j, mats: CollisionMatrices):
    """Coefficient-space collision using per-pair matrices.

    Mode-wise momentum is conserved exactly (the same increment is
    subtracted from i and added to j).  At order 0 the arithmetic is
    bit-compatible with kinetics.collide.
    """
    coeff_i = np.asarray(coeff_i, dtype=np.float64)
    coeff_j = np.asarray(coeff_j, dtype=np.float64)
    q_hat = coeff_i - coeff_j
    if mats.order == 0:
        d = 0.5 * (q_hat[0] * (1.0 - mats.v_hat[0, 0]) + mats.w_hat[0])
        d = d[None, :]
    else:
        d = 0.5 * (q_hat - np.einsum("ld,lk->kd", q_hat, mats.v_hat) + mats.w_hat)
    return coeff_i - d, coeff_j + d


def _angles_block(q_nodes, qn, spec, r1):
    """cos/sin at every (pair, node); degenerate nodes get the identity."""
    alive = qn > 0.0
    n_clamp = 0
    if spec.interaction == "coulomb":
        pref = spec.tau0_prefactor
        qn_safe = np.maximum(qn, spec.q_floor)
        n_clamp = int(np.count_nonzero(alive & (qn < spec.q_floor)))
        t0 = pref / (qn_safe * qn_safe * qn_safe)
    else:
        t0 = np.broadcast_to(spec.tau0_prefactor, qn.shape)
    if spec.surrogate == "tanh":
        c = 1.0 - 2.0 * np.tanh(t0)
    elif spec.surrogate == "linear":
        c = np.where(t0 <= 1.0, 1.0 - 2.0 * t0, -1.0)
    else:
        a = kinetics.solve_A(np.ascontiguousarray(t0).ravel()).reshape(qn.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = 1.0 + np.log1p((1.0 - r1[:, None]) * np.expm1(-2.0 * a)) / a
        c = np.where(np.isinf(a), 1.0, c)
    c = np.clip(c, -1.0, 1.0)
    if not alive.all():
        c = np.where(alive, c, 1.0)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    return c, s, n_clamp


def _h_block(q_nodes, qn, phi):
    """Azimuthal vectors for every (pair, node) with one phi per pair.

    The rare nodes needing the cyclic-frame fallback (q aligned with x, or
    q = 0) are recomputed individually afterwards.
    """
    qx, qy, qz = q_nodes[..., 0], q_nodes[..., 1], q_nodes[..., 2]
    qperp = np.sqrt(qy * qy + qz * qz)
    bad = qperp < 1e-12 * qn  # includes qn = 0
    cp = np.cos(phi)[:, None]
    sp = np.sin(phi)[:, None]
    den = np.where(bad, 1.0, qperp)
    h = np.empty_like(q_nodes)
    h[..., 0] = qperp * cp
    h[..., 1] = -(qy * qx * cp + qn * qz * sp) / den
    h[..., 2] = -(qz * qx * cp - qn * qy * sp) / den
    if np.any(bad):
        rows, cols = np.nonzero(bad)
        phi_fix = np.broadcast_to(phi[:, None], qn.shape)[rows, cols]
        fix = np.zeros((rows.size, 3))
        live = qn[rows, cols] > 0.0
        if np.any(live):
            fix[live] = kinetics.h_vector(q_nodes[rows[live], cols[live]],
                                          phi_fix[live])
        h[rows, cols] = fix
    return h


def sg_collide_batch(coeffs, idx_i, idx_j, r1, phi, spec, psi, weights):
    """Collide disjoint coefficient pairs in place (vectorized over pairs).

    ``coeffs``: (N, M+1, 3); ``psi``: (n_q, M+1) basis table at the nodes;
    ``weights``: (n_q,).  Same (r1[m], phi[m]) shared across nodes of pair m.
    Returns (n_skipped, n_qfloor_clamped); a pair is skipped only when its
    relative velocity vanishes at every node.
    """
    n_pairs = idx_i.size
    n_skip = n_clamp = 0
    m1 = coeffs.shape[1]
    psi_t = np.ascontiguousarray(psi.T)  # (M+1, n_q)
    for s0 in range(0, n_pairs, _SG_CHUNK):
        s1 = min(s0 + _SG_CHUNK, n_pairs)
        nc_chunk = s1 - s0
        ii = idx_i[s0:s1]
        jj = idx_j[s0:s1]
        q_hat = coeffs[ii] - coeffs[jj]  # (c, M+1, 3)
        q_nodes = np.tensordot(q_hat, psi_t, axes=(1, 0)).transpose(0, 2, 1)
        qn = np.sqrt(np.einsum("cqd,cqd->cq", q_nodes, q_nodes))
        dead = ~np.any(qn > 0.0, axis=1)
        c, s, nc = _angles_block(q_nodes, qn, spec, r1[s0:s1])
        n_clamp += nc
        h = _h_block(q_nodes, qn, phi[s0:s1])
        # V[c] = psi^T diag(w c) psi as one flattened GEMM
        a = (weights * c)[:, None, :] * psi_t[None, :, :]     # (c, M+1, n_q)
        v_hat = (a.reshape(nc_chunk * m1, -1) @ psi).reshape(nc_chunk, m1, m1)
        hs = h * s[:, :, None] * weights[None, :, None]       # (c, n_q, 3)
        w_hat = np.tensordot(hs, psi, axes=(1, 0)).transpose(0, 2, 1)
        d = 0.5 * (q_hat - np.einsum("cld,clk->ckd", q_hat, v_hat) + w_hat)
        if np.any(dead):
            n_skip += int(np.count_nonzero(dead))
            d[dead] = 0.0
        coeffs[ii] -= d
        coeffs[jj] += d
    return n_skip, n_clamp


class CollisionLog:
    """Replayable record of per-step pair selections and uniform draws.

    Records are (step:u32, i:u32, j:u32, r1:f64, r2:f64), appended in
    deterministic pair order within each step.  The binary file format is a
    one-line versioned header followed by packed little-endian records.
    """

    def __init__(self, records: np.ndarray | None = None):
        self._chunks: list[np.ndarray] = []
        self._records = (
            np.empty(0, dtype=LOG_DTYPE) if records is None else records.astype(LOG_DTYPE)
        )

    def append_step(self, step: int, idx_i, idx_j, r1, r2) -> None:
        n = len(idx_i)
        rec = np.empty(n, dtype=LOG_DTYPE)
        rec["step"] = step
        rec["i"] = idx_i
        rec["j"] = idx_j
        rec["r1"] = r1
        rec["r2"] = r2
        self._chunks.append(rec)

    @property
    def records(self) -> np.ndarray:
        if self._chunks:
            self._records = np.concatenate([self._records, *self._chunks])
            self._chunks = []
        return self._records

    def __len__(self) -> int:
        return self.records.size

    def max_index(self) -> int:
        rec = self.records
        if rec.size == 0:
            return -1
        return int(max(rec["i"].max(), rec["j"].max()))

    def for_step(self, step: int) -> np.ndarray:
        """Records of one step (they are stored contiguously and in order)."""
        rec = self.records
        lo = np.searchsorted(rec["step"], step, side="left")
        hi = np.searchsorted(rec["step"], step, side="right")
        return rec[lo:hi]

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(_LOG_MAGIC + b" 1\n")
            f.write(self.records.tobytes())

    @classmethod
    def load(cls, path) -> "CollisionLog":
        with open(path, "rb") as f:
            header = f.readline().rstrip(b"\n")
            body = f.read()
        parts = header.split()
        if len(parts) != 2 or parts[0] != _LOG_MAGIC:
            raise ValueError(f"not a collision log: {path}")
        if parts[1] != b"1":
            raise ValueError(f"unsupported collision log version {parts[1]!r}")
        if len(body) % LOG_DTYPE.itemsize:
            raise ValueError("truncated collision log")
        return cls(np.frombuffer(body, dtype=LOG_DTYPE).copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, CollisionLog):
            return NotImplemented
        return bool(np.array_equal(self.records, other.records))
