"""Core types and scalar quantities of the planar n-vortex problem.

Positions are stored as a flat interleaved vector ``(x_1, y_1, ..., x_n, y_n)``
so that the 2x2 block structure of the circulation matrix, the rotation
operator and the Hessian lines up with plain slicing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import CollisionError, InvalidCirculationError

#: Smallest admissible |Gamma_i| and |sum Gamma_i|.
CIRCULATION_FLOOR = 1e-12
#: Smallest admissible pairwise distance at construction.
COLLISION_FLOOR = 1e-12
#: Default relative tolerance for identity checks.
IDENTITY_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CirculationSet:
    """Vortex strengths ``Gamma_i`` with the derived totals.

    Raises :class:`InvalidCirculationError` if any strength, or their sum,
    is (numerically) zero.
    """

    gamma: np.ndarray

    def __init__(self, gamma: Sequence[float]):
        g = np.asarray(gamma, dtype=float).ravel()
        if g.size < 1:
            raise InvalidCirculationError("need at least one vortex")
        if not np.all(np.isfinite(g)):
            raise InvalidCirculationError("circulations must be finite")
        if np.any(np.abs(g) < CIRCULATION_FLOOR):
            raise InvalidCirculationError(f"zero circulation in {g.tolist()}")
        if abs(g.sum()) < CIRCULATION_FLOOR:
            raise InvalidCirculationError(f"total circulation vanishes for {g.tolist()}")
        object.__setattr__(self, "gamma", _frozen(g))

    @property
    def n(self) -> int:
        return int(self.gamma.size)

    @property
    def total(self) -> float:
        return total_circulation(self)

    @property
    def L(self) -> float:
        return vortex_angular_momentum(self)

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.gamma > 0))

    @property
    def same_sign(self) -> bool:
        return bool(np.all(self.gamma > 0) or np.all(self.gamma < 0))

    def mass_diagonal(self) -> np.ndarray:
        """Diagonal of ``M = diag(G_1, G_1, ..., G_n, G_n)``."""
        return np.repeat(self.gamma, 2)

    def __eq__(self, other):
        return isinstance(other, CirculationSet) and np.array_equal(self.gamma, other.gamma)

    def __hash__(self):
        return hash(self.gamma.tobytes())


@dataclass(frozen=True)
class Configuration:
    """Planar positions of n vortices as a flat 2n-vector."""

    z: np.ndarray

    def __init__(self, z: Sequence[float]):
        a = np.asarray(z, dtype=float)
        if a.ndim == 2 and a.shape[1] == 2:
            a = a.ravel()
        if a.ndim != 1 or a.size % 2 or a.size == 0:
            raise ValueError("positions must be a flat vector of even length or an (n, 2) array")
        if not np.all(np.isfinite(a)):
            raise ValueError("positions must be finite")
        check_collisions(a)
        object.__setattr__(self, "z", _frozen(a))

    @property
    def n(self) -> int:
        return self.z.size // 2

    @property
    def points(self) -> np.ndarray:
        """Positions reshaped to ``(n, 2)``."""
        return self.z.reshape(-1, 2)

    def distances(self) -> np.ndarray:
        return pairwise_distances(self.z)

    def __eq__(self, other):
        return isinstance(other, Configuration) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash(self.z.tobytes())


@dataclass(frozen=True)
class RelativeEquilibrium:
    """A configuration rotating rigidly with angular velocity ``omega``.

    ``residual`` is the max-norm of ``grad H + omega M z`` at ``config``.
    """

    config: Configuration
    omega: float
    residual: float
    circulations: CirculationSet
    iterations: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def z(self) -> np.ndarray:
        return self.config.z

    @property
    def gamma(self) -> np.ndarray:
        return self.circulations.gamma

    @property
    def n(self) -> int:
        return self.config.n

    def scaled(self, r: float) -> "RelativeEquilibrium":
        """The same equilibrium with lengths multiplied by ``r`` (``omega -> omega / r^2``)."""
        from .derivatives import residual

        z = self.config.z * r
        w = self.omega / (r * r)
        res = float(np.max(np.abs(residual(z, w, self.circulations))))
        return RelativeEquilibrium(Configuration(z), w, res, self.circulations, self.iterations,
                                   dict(self.meta))

    def with_unit_omega(self) -> "RelativeEquilibrium":
        """Rescale so that ``|omega| = 1``."""
        return self.scaled(math.sqrt(abs(self.omega)))


ConfigLike = Union[Configuration, Sequence[float], np.ndarray]
CircLike = Union[CirculationSet, Sequence[float], np.ndarray]


def as_z(z: ConfigLike) -> np.ndarray:
    if isinstance(z, Configuration):
        return z.z
    if isinstance(z, RelativeEquilibrium):
        return z.config.z
    return np.asarray(z, dtype=float).ravel()


def as_gamma(c: CircLike) -> np.ndarray:
    if isinstance(c, CirculationSet):
        return c.gamma
    return np.asarray(c, dtype=float).ravel()


def pairwise_distances(z: ConfigLike) -> np.ndarray:
    """Condensed vector of ``r_ij`` for ``i < j``."""
    p = as_z(z).reshape(-1, 2)
    iu = np.triu_indices(len(p), 1)
    d = p[:, None, :] - p[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])[iu]


def check_collisions(z: ConfigLike, floor: float = COLLISION_FLOOR) -> None:
    r = pairwise_distances(z)
    if r.size and r.min() < floor:
        raise CollisionError(f"vortices collide: min r_ij = {r.min():.3e} < {floor:g}")


def total_circulation(c: CircLike) -> float:
    return float(np.sum(as_gamma(c)))


def vortex_angular_momentum(c: CircLike) -> float:
    """Total vortex angular momentum ``L = sum_{i<j} G_i G_j``."""
    g = as_gamma(c)
    iu = np.triu_indices(g.size, 1)
    return float(np.sum(np.outer(g, g)[iu]))


def center_of_vorticity(z: ConfigLike, c: CircLike) -> np.ndarray:
    g = as_gamma(c)
    total = g.sum()
    if abs(total) < CIRCULATION_FLOOR:
        raise InvalidCirculationError("center of vorticity undefined for zero total circulation")
    return g @ as_z(z).reshape(-1, 2) / total


def recenter(z: ConfigLike, c: CircLike) -> np.ndarray:
    """Translate ``z`` so its center of vorticity is the origin."""
    p = as_z(z).reshape(-1, 2)
    return (p - center_of_vorticity(z, c)).ravel()


def angular_impulse(z: ConfigLike, c: CircLike) -> float:
    p = as_z(z).reshape(-1, 2)
    return 0.5 * float(as_gamma(c) @ np.sum(p * p, axis=1))


def hamiltonian(z: ConfigLike, c: CircLike) -> float:
    """``H = -sum_{i<j} G_i G_j ln r_ij``."""
    g = as_gamma(c)
    r = pairwise_distances(z)
    if r.size and r.min() <= 0.0:
        raise CollisionError("hamiltonian is singular at a collision")
    iu = np.triu_indices(g.size, 1)
    return -float(np.sum(np.outer(g, g)[iu] * np.log(r)))


def angular_velocity(z: ConfigLike, c: CircLike) -> float:
    """``omega = L / (2 I)``.

    Returns NaN when both ``I`` and ``L`` vanish (indeterminate) and raises
    ``ZeroDivisionError`` when only ``I`` does.
    """
    I = angular_impulse(z, c)
    L = vortex_angular_momentum(c)
    p = as_z(z).reshape(-1, 2)
    scale = 0.5 * float(np.abs(as_gamma(c)) @ np.sum(p * p, axis=1))
    lscale = float(np.sum(np.abs(as_gamma(c)))) ** 2
    if abs(I) <= IDENTITY_RTOL * max(scale, 1e-300):
        if abs(L) <= IDENTITY_RTOL * lscale:
            return math.nan
        raise ZeroDivisionError("angular impulse vanishes while L does not")
    return L / (2.0 * I)


def rotate(z: ConfigLike, theta: float) -> np.ndarray:
    """Apply ``e^{J theta}`` to every planar position (``J = [[0, 1], [-1, 0]]``)."""
    cs, sn = math.cos(theta), math.sin(theta)
    R = np.array([[cs, sn], [-sn, cs]])
    return (as_z(z).reshape(-1, 2) @ R.T).ravel()
