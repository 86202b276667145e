"""Closed-form symmetric relative equilibria with their analytic reduced spectra.

Each constructor returns a :class:`FamilyPoint`: the centered configuration,
the un-centered "hat" coordinates in which the closed-form Hessian blocks are
written, the exact angular velocity and, where it is known in closed form,
the full list of eigenvalues of ``M^{-1} D2H`` (trivial ones included).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .derivatives import residual
from .model import CirculationSet, Configuration, RelativeEquilibrium, vortex_angular_momentum

SQRT3 = math.sqrt(3.0)
#: ``L = m^2 + 4m + 1`` vanishes here for the rhombus/trapezoid circulations (1, 1, m, m).
M_L_ZERO = -2.0 + SQRT3
#: Constructors verify their own output against this residual bound.
FAMILY_RESIDUAL_TOL = 1e-10


class Family(str, enum.Enum):
    TRIANGLE = "Triangle"
    RHOMBUS_A = "RhombusA"
    RHOMBUS_B = "RhombusB"
    TRAPEZOID = "Trapezoid"
    NGON = "NGon"
    ONE_PLUS_NGON = "OnePlusNGon"
    COLLINEAR3 = "Collinear3"


@dataclass(frozen=True)
class FamilyPoint:
    config: Configuration
    hat: np.ndarray
    circulations: CirculationSet
    omega: float
    analytic_mu: Optional[np.ndarray]
    family: Family
    parameter: float
    #: set when the point is not a relative equilibrium proper (omega = 0)
    special: Optional[str] = None

    @property
    def z(self) -> np.ndarray:
        return self.config.z

    def residual(self) -> float:
        return float(np.max(np.abs(residual(self.config.z, self.omega, self.circulations))))

    def to_equilibrium(self) -> RelativeEquilibrium:
        if self.special is not None:
            raise ValueError(f"{self.family.value} at parameter {self.parameter!r} is a "
                             f"{self.special}, not a relative equilibrium with omega != 0")
        return RelativeEquilibrium(self.config, self.omega, self.residual(), self.circulations,
                                   meta={"family": self.family.value, "parameter": self.parameter})


def _finish(hat, gamma, omega, mu, family, parameter, special=None) -> FamilyPoint:
    c = CirculationSet(gamma)
    hat = np.asarray(hat, dtype=float).ravel()
    p = hat.reshape(-1, 2)
    center = c.gamma @ p / c.total
    z = Configuration((p - center).ravel())
    fp = FamilyPoint(z, hat, c, float(omega),
                     None if mu is None else np.sort(np.asarray(mu, dtype=float)),
                     family, float(parameter), special)
    res = fp.residual()
    if res > FAMILY_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(c.gamma))) ** 2):
        raise ArithmeticError(f"{family.value}({parameter}) residual {res:.3e} too large")
    return fp


def triangle(g1: float, g2: float, g3: float) -> FamilyPoint:
    """Equilateral triangle inscribed in the unit circle; any circulations.

    ``omega = Gamma / 3`` and the nontrivial reduced eigenvalues are
    ``+-sqrt(Gamma^2/9 - L/3)``.
    """
    gamma = [g1, g2, g3]
    total = float(sum(gamma))
    if abs(total) < 1e-12:
        raise ValueError("total circulation must be nonzero")
    hat = [(1.0, 0.0), (-0.5, SQRT3 / 2), (-0.5, -SQRT3 / 2)]
    L = vortex_angular_momentum(gamma)
    omega = total / 3.0
    mu = math.sqrt(max(total ** 2 / 9.0 - L / 3.0, 0.0))
    return _finish(hat, gamma, omega, [0, 0, omega, -omega, mu, -mu], Family.TRIANGLE, 0.0)


def triangle_mu_squared(g1: float, g2: float, g3: float) -> float:
    """Sum-of-squares form ``((G1 + G2 - 2 G3)^2 + 3 (G1 - G2)^2) / 36``."""
    return ((g1 + g2 - 2 * g3) ** 2 + 3 * (g1 - g2) ** 2) / 36.0


def rhombus_y2(m: float, branch: str) -> float:
    """Squared half-diagonal ``y^2 = (beta +- sqrt(beta^2 + 4m)) / 2``, ``beta = 3(1 - m)``."""
    branch = branch.upper()
    beta = 3.0 * (1.0 - m)
    disc = math.sqrt(beta * beta + 4.0 * m)
    if branch == "A":
        if not -1.0 < m <= 1.0:
            raise ValueError(f"rhombus A needs m in (-1, 1], got {m}")
        return 0.5 * (beta + disc)
    if branch == "B":
        if not -1.0 < m < 0.0:
            raise ValueError(f"rhombus B needs m in (-1, 0), got {m}")
        # beta - disc cancels badly near m = 0; use the product of roots = -m
        return -2.0 * m / (beta + disc)
    raise ValueError(f"branch must be 'A' or 'B', got {branch!r}")


def rhombus_m_of_y2(y2: float) -> float:
    """Inverse relation ``m = (3 y^2 - y^4) / (3 y^2 - 1)``."""
    return (3.0 * y2 - y2 * y2) / (3.0 * y2 - 1.0)


def rhombus_mu(m: float, y2: float) -> tuple[float, float]:
    """Reduced eigenvalues for the eigenvectors ``v1`` and ``v2``."""
    mu1 = 0.5 - 2.0 * (m * (y2 - 1.0) + 2.0) / (y2 + 1.0) ** 2
    mu2 = 2.0 * (m + 1.0) * (1.0 - y2) / (y2 + 1.0) ** 2
    return mu1, mu2


def rhombus_margins(y2: float) -> tuple[float, float]:
    """``omega^2 - mu_1^2`` and ``omega^2 - mu_2^2`` written purely in ``y^2``."""
    g = lambda t: 3 * t ** 3 - 15 * t ** 2 + 41 * t - 5
    d = (3 * y2 - 1) ** 2
    m1 = -4 * (y2 ** 2 - 4 * y2 + 1) * (3 * y2 ** 2 - 2 * y2 + 3) / ((y2 + 1) ** 2 * d)
    m2 = y2 ** 3 * g(y2) * g(1 / y2) / (4 * (y2 + 1) ** 4 * d)
    return m1, m2


def rhombus_eigenvectors(m: float, y: float) -> tuple[np.ndarray, np.ndarray]:
    v1 = np.array([m * y, 0, -m * y, 0, 0, -1, 0, 1], dtype=float)
    v2 = np.array([m, 0, m, 0, -1, 0, -1, 0], dtype=float)
    return v1, v2


def rhombus(m: float, branch: str = "A") -> FamilyPoint:
    """Rhombus with vertices (+-1, 0), (0, +-y) and circulations (1, 1, m, m).

    Rhombus B at ``m = -2 + sqrt(3)`` is a fixed point (omega = 0); it is
    returned with ``special="fixed point"`` and cannot be classified.
    """
    branch = branch.upper()
    y2 = rhombus_y2(m, branch)
    y = math.sqrt(y2)
    omega = 0.5 + 2.0 * m / (y2 + 1.0)
    mu1, mu2 = rhombus_mu(m, y2)
    hat = [(1.0, 0.0), (-1.0, 0.0), (0.0, y), (0.0, -y)]
    fam = Family.RHOMBUS_A if branch == "A" else Family.RHOMBUS_B
    special = "fixed point" if abs(omega) < 1e-12 else None
    mu = [0, 0, omega, -omega, mu1, -mu1, mu2, -mu2]
    return _finish(hat, [1, 1, m, m], omega, mu, fam, m, special)


def cubic_root_bisect_newton(coeffs, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Real root of a polynomial on ``[lo, hi]``: bisection to isolate, Newton to polish.

    ``coeffs`` are highest degree first.  The endpoint values must differ in sign.
    """
    p = np.poly1d(coeffs)
    dp = p.deriv()
    flo, fhi = p(lo), p(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        fm = p(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        step = p(x) / dp(x)
        x -= step
        if abs(step) < tol * max(1.0, abs(x)):
            break
    return float(x)


@dataclass(frozen=True)
class RhombusConstants:
    m_star: float
    kappa: float
    m_Lzero: float


def rhombus_constants() -> RhombusConstants:
    """Pitchfork value ``m*`` (real root of ``9m^3 + 3m^2 + 7m + 5``), ``kappa`` and ``-2 + sqrt(3)``."""
    m_star = cubic_root_bisect_newton([9, 3, 7, 5], -1.0, 0.0)
    return RhombusConstants(m_star, -m_star * (3 * m_star + 2), M_L_ZERO)


def trapezoid_xy(m: float) -> tuple[float, float]:
    if not m > 0:
        raise ValueError(f"the isosceles trapezoid family exists only for m > 0, got {m}")
    alpha = m * (m + 2) / (2 * m + 1)
    return math.sqrt(alpha), math.sqrt(2 * m + 3 - alpha)


def trapezoid_w1(m: float) -> np.ndarray:
    x, _ = trapezoid_xy(m)
    return np.array([m * x, 0, -m * x, 0, 1, 0, -1, 0], dtype=float)


def trapezoid_w2(m: float) -> np.ndarray:
    x, _ = trapezoid_xy(m)
    a = m * math.sqrt(3 * (2 * m + 1)) / (m * m + m + 1)
    return np.array([-a, -m, a, -m, a * x, 1, -a * x, 1], dtype=float)


def trapezoid(m: float) -> FamilyPoint:
    """Isosceles trapezoid with hat vertices (1, 0), (-1, 0), (-x, y), (x, y)."""
    x, y = trapezoid_xy(m)
    omega = (2 * m + 1) / (2 * m + 2)
    mu2 = (m * m + m + 1) / (2 * (m + 1) * (m + 2))
    hat = [(1.0, 0.0), (-1.0, 0.0), (-x, y), (x, y)]
    mu = [0, 0, omega, -omega, 0, 0, mu2, -mu2]
    return _finish(hat, [1, 1, m, m], omega, mu, Family.TRAPEZOID, m)


def ngon(n: int, gamma0: Optional[float] = None) -> FamilyPoint:
    """Unit vortices on the unit circle, optionally with a central vortex ``gamma0``."""
    if n < 3:
        raise ValueError(f"need n >= 3 ring vortices, got {n}")
    k = np.arange(n)
    ring = np.column_stack([np.cos(2 * np.pi * k / n), np.sin(2 * np.pi * k / n)])
    gamma = [1.0] * n
    omega = (n - 1) / 2.0
    fam = Family.NGON
    if gamma0 is not None:
        ring = np.vstack([ring, [0.0, 0.0]])
        gamma.append(float(gamma0))
        omega += float(gamma0)
        fam = Family.ONE_PLUS_NGON
    return _finish(ring, gamma, omega, None, fam, n)


def ngon_points_mp(n: int, dps: int = 40) -> list:
    """Ring positions of :func:`ngon` as mpmath numbers with ``dps`` digits."""
    import mpmath

    with mpmath.workdps(dps):
        return [(mpmath.cos(2 * mpmath.pi * k / n), mpmath.sin(2 * mpmath.pi * k / n))
                for k in range(n)]


def collinear3() -> FamilyPoint:
    """Three unit vortices at -1, 0, 1 (omega = 3/2, I = 1)."""
    hat = [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]
    return _finish(hat, [1, 1, 1], 1.5, None, Family.COLLINEAR3, 3)
