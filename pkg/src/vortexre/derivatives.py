"""Gradient and Hessian of the vortex Hamiltonian and the block operators M, K.

The Hessian is assembled from 2x2 blocks

    A_ij = G_i G_j / r_ij^2 (I - 2 u u^T),   u = (z_i - z_j) / r_ij,   i != j
    A_ii = -sum_{j != i} A_ij

Every block has the form ``[[a, b], [b, -a]]``, which commutes with J
exactly in floating point; the anti-commutation ``D2H K = -K D2H`` therefore
holds to the last bit.
"""

from __future__ import annotations

import numpy as np

from .errors import CollisionError
from .model import CircLike, ConfigLike, as_gamma, as_z

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _differences(z: np.ndarray):
    p = z.reshape(-1, 2)
    d = p[:, None, :] - p[None, :, :]  # d[i, j] = z_i - z_j
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    off = ~np.eye(len(p), dtype=bool)
    if np.any(r2[off] <= 0.0):
        raise CollisionError("derivative of H is singular at a collision")
    np.fill_diagonal(r2, 1.0)
    return d, r2, off


def grad_H(z: ConfigLike, c: CircLike) -> np.ndarray:
    """Stacked partial gradients ``grad_i H = sum_j G_i G_j (z_j - z_i) / r_ij^2``."""
    z = as_z(z)
    g = as_gamma(c)
    d, r2, off = _differences(z)
    w = np.outer(g, g) / r2
    w[~off] = 0.0
    return -(w[..., None] * d).sum(axis=1).ravel()


def hessian_blocks(z: ConfigLike, c: CircLike) -> np.ndarray:
    """Array of shape ``(n, n, 2, 2)`` holding every block ``A_ij``."""
    z = as_z(z)
    g = as_gamma(c)
    n = g.size
    d, r2, off = _differences(z)
    dx, dy = d[..., 0], d[..., 1]
    s = np.outer(g, g) / (r2 * r2)
    a = s * (dy * dy - dx * dx)
    b = -2.0 * s * dx * dy
    a[~off] = 0.0
    b[~off] = 0.0
    diag_a = -a.sum(axis=1)
    diag_b = -b.sum(axis=1)
    idx = np.arange(n)
    a[idx, idx] = diag_a
    b[idx, idx] = diag_b
    blocks = np.empty((n, n, 2, 2))
    blocks[..., 0, 0] = a
    blocks[..., 0, 1] = b
    blocks[..., 1, 0] = b
    blocks[..., 1, 1] = -a
    return blocks


def hessian_H(z: ConfigLike, c: CircLike) -> np.ndarray:
    """Dense symmetric ``2n x 2n`` Hessian of H."""
    blocks = hessian_blocks(z, c)
    n = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def circulation_matrix(c: CircLike) -> np.ndarray:
    """Dense ``M = diag(G_1, G_1, ..., G_n, G_n)``."""
    return np.diag(np.repeat(as_gamma(c), 2))


def K_matrix(n: int) -> np.ndarray:
    """Block-diagonal matrix with J on the diagonal."""
    return np.kron(np.eye(n), J2)


def apply_K(v) -> np.ndarray:
    """Multiply by K without forming it: each pair ``(a, b)`` maps to ``(b, -a)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] % 2:
        raise ValueError("apply_K needs an even-length vector")
    p = v.reshape(-1, 2, *v.shape[1:])
    out = np.empty_like(p)
    out[:, 0] = p[:, 1]
    out[:, 1] = -p[:, 0]
    return out.reshape(v.shape)


def grad_I(z: ConfigLike, c: CircLike) -> np.ndarray:
    return np.repeat(as_gamma(c), 2) * as_z(z)


def residual(z: ConfigLike, omega: float, c: CircLike) -> np.ndarray:
    """``grad H(z) + omega M z``; vanishes exactly at relative equilibria."""
    return grad_H(z, c) + omega * grad_I(z, c)


def translation_vectors(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``s = (1, 0, ..., 1, 0)`` and ``K s``, the translation kernel of D2H."""
    s = np.tile([1.0, 0.0], n)
    return s, apply_K(s)
