"""Orthonormal polynomial basis and Gauss quadrature on the unit interval.

The random parameter z is uniform on [0, 1], so the natural basis is the
shifted Legendre family, rescaled to be orthonormal with respect to the
flat weight:

    psi_k(z) = sqrt(2k + 1) * P_k(2z - 1),   int_0^1 psi_k psi_l dz = delta_kl.

Quadrature nodes/weights are Gauss-Legendre mapped to [0, 1] with weights
normalized to sum to 1, exact for polynomials of degree <= 2 n_q - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["legendre_P", "PolyBasis", "Quadrature", "gauss_nodes", "basis_eval"]


def legendre_P(l: int, mu):
    """Legendre polynomial P_l(mu) by the three-term recurrence.

    ``mu`` may be a scalar or array in [-1, 1] (no clamping is applied).
    """
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    mu = np.asarray(mu, dtype=np.float64)
    p_prev = np.ones_like(mu)
    if l == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = mu.copy()
    for n in range(1, l):
        p, p_prev = ((2 * n + 1) * mu * p - n * p_prev) / (n + 1), p
    return p if p.ndim else float(p)


@dataclass(frozen=True)
class PolyBasis:
    """Orthonormal shifted-Legendre basis of maximal degree ``order`` on [0, 1]."""

    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")

    def eval(self, k: int, z):
        """psi_k(z) = sqrt(2k+1) P_k(2z - 1); requires 0 <= k <= order."""
        if not 0 <= k <= self.order:
            raise ValueError(f"mode index {k} outside [0, {self.order}]")
        return np.sqrt(2.0 * k + 1.0) * legendre_P(k, 2.0 * np.asarray(z) - 1.0)

    def table(self, z) -> np.ndarray:
        """Evaluation matrix, shape ``(len(z), order + 1)``: column k is psi_k."""
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        x = 2.0 * z - 1.0
        m = self.order + 1
        out = np.empty((z.size, m))
        out[:, 0] = 1.0
        if m > 1:
            out[:, 1] = x
        for n in range(1, m - 1):
            out[:, n + 1] = ((2 * n + 1) * x * out[:, n] - n * out[:, n - 1]) / (n + 1)
        out *= np.sqrt(2.0 * np.arange(m) + 1.0)
        return out


def basis_eval(basis: PolyBasis, k: int, z):
    """Functional alias for :meth:`PolyBasis.eval`."""
    return basis.eval(k, z)


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on [0, 1]; ``weights`` sum to 1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return self.nodes.size


def gauss_nodes(n_q: int) -> Quadrature:
    """Gauss-Legendre rule with ``n_q`` nodes mapped from [-1, 1] to [0, 1]."""
    if n_q < 1:
        raise ValueError(f"need at least one node, got {n_q}")
    x, w = np.polynomial.legendre.leggauss(n_q)
    return Quadrature(nodes=0.5 * (x + 1.0), weights=0.5 * w)
