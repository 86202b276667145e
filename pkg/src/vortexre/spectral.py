"""Linear stability of relative equilibria.

At an equilibrium ``z0`` with angular velocity ``omega`` the rotating-frame
linearisation is ``B = K (C + omega I)`` with ``C = M^{-1} D2H(z0)``.  Every
real eigenpair ``(mu, v)`` of C spans a B-invariant plane ``{v, Kv}`` on which
B has eigenvalues ``+-sqrt(mu^2 - omega^2)``, so the spectrum of B is read off
the (better conditioned) spectrum of C.  Four eigenvalues are always present:
``0, 0`` (from ``mu = +-omega`` on ``span{z0, K z0}``) and ``+-i omega`` (from
``mu = 0`` on the translations ``s, K s``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .derivatives import K_matrix, apply_K, circulation_matrix, grad_H, hessian_H
from .errors import InconsistencyError
from .model import CircLike, ConfigLike, RelativeEquilibrium, as_gamma, as_z, vortex_angular_momentum

DEFAULT_TOL = 1e-8
#: Trivial eigenvalues are accepted within this radius times max(1, |omega|).
TRIVIAL_RADIUS = 1e-6
#: An equilibrium counts as L = 0 when |L| <= this times max(1, sum |G_i G_j|).
L_ZERO_TOL = 1e-10
#: Largest eigenvector condition number accepted as "diagonalisable".
JORDAN_COND_MAX = 1e8


class Stability(str, enum.Enum):
    DEGENERATE = "Degenerate"
    UNSTABLE = "Unstable"
    SPECTRALLY_STABLE = "SpectrallyStable"
    LINEARLY_STABLE = "LinearlyStable"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class MorseData:
    """Inertia of ``q(v) = v^T (D2H + omega M) v`` on ``{v : v^T M z0 = 0}``."""

    nullity: int
    index: int
    eigenvalues: np.ndarray = field(repr=False)
    tol: float = 0.0

    @property
    def is_nondegenerate_minimum(self) -> bool:
        return self.nullity == 1 and self.index == 0

    def to_dict(self) -> dict:
        return {"nullity": self.nullity, "index": self.index,
                "eigenvalues": [float(x) for x in self.eigenvalues], "tol": self.tol}


@dataclass(frozen=True)
class SpectralReport:
    omega: float
    full_eigenvalues: np.ndarray = field(repr=False)
    reduced_eigenvalues: np.ndarray = field(repr=False)
    nontrivial_eigenvalues: np.ndarray
    #: one ``lambda^2 = mu^2 - omega^2`` per nontrivial pair
    pair_squares: np.ndarray = field(repr=False)
    pair_types: tuple
    trivial_matched: tuple
    trivial_error: float
    classification: Stability
    jordan_ok: Optional[bool]
    margin: float
    L_zero: bool
    notes: tuple = ()

    @property
    def n_real_pairs(self) -> int:
        return sum(t == "real" for t in self.pair_types)

    @property
    def n_imaginary_pairs(self) -> int:
        return sum(t == "imaginary" for t in self.pair_types)

    def to_dict(self) -> dict:
        pairs = lambda a: [[float(np.real(x)), float(np.imag(x))] for x in a]
        return {
            "omega": float(self.omega),
            "classification": self.classification.value,
            "full_eigenvalues": pairs(self.full_eigenvalues),
            "reduced_eigenvalues": pairs(self.reduced_eigenvalues),
            "nontrivial_eigenvalues": pairs(self.nontrivial_eigenvalues),
            "pair_types": list(self.pair_types),
            "trivial_matched": [bool(x) for x in self.trivial_matched],
            "trivial_error": float(self.trivial_error),
            "jordan_ok": None if self.jordan_ok is None else bool(self.jordan_ok),
            "margin": float(self.margin),
            "L_zero": bool(self.L_zero),
            "notes": list(self.notes),
        }


def _unpack(re: RelativeEquilibrium):
    return re.config.z, re.circulations.gamma, float(re.omega)


def reduced_matrix(re: RelativeEquilibrium) -> np.ndarray:
    """``C = M^{-1} D2H(z0)``."""
    z, g, _ = _unpack(re)
    return hessian_H(z, g) / np.repeat(g, 2)[:, None]


def stability_matrix(re: RelativeEquilibrium) -> np.ndarray:
    """``B = K (M^{-1} D2H(z0) + omega I)``."""
    z, g, w = _unpack(re)
    C = reduced_matrix(re)
    return apply_K(C + w * np.eye(C.shape[0]))


def reduced_spectrum(re: RelativeEquilibrium):
    """Eigenvalues and eigenvectors of ``M^{-1} D2H(z0)``.

    For same-signed circulations the problem is made symmetric by scaling with
    ``|M|^{-1/2}``; eigenvalues are then real and the returned eigenvectors
    (columns) are M-orthonormal up to the sign of the circulations.  Mixed
    signs use a general nonsymmetric solve.

    Returns
    -------
    mu : ndarray, shape (2n,)
    V : ndarray, shape (2n, 2n)
    """
    z, g, _ = _unpack(re)
    D2H = hessian_H(z, g)
    m = np.repeat(g, 2)
    if np.all(g > 0) or np.all(g < 0):
        sign = 1.0 if g[0] > 0 else -1.0
        d = 1.0 / np.sqrt(np.abs(m))
        S = d[:, None] * D2H * d[None, :]
        mu, U = np.linalg.eigh(0.5 * (S + S.T))
        mu = sign * mu
        V = d[:, None] * U
        order = np.argsort(mu)
        return mu[order], V[:, order]
    mu, V = np.linalg.eig(D2H / m[:, None])
    if np.all(np.abs(mu.imag) == 0.0):
        mu, V = mu.real, V.real
    order = np.lexsort((np.imag(mu), np.real(mu)))
    return mu[order], V[:, order]


def _match_trivial(mu: np.ndarray, omega: float):
    targets = [0.0, 0.0, omega, -omega]
    radius = TRIVIAL_RADIUS * max(1.0, abs(omega))
    free = list(range(mu.size))
    hits, worst = [], 0.0
    for t in targets:
        k = min(free, key=lambda i: abs(mu[i] - t))
        dist = abs(mu[k] - t)
        hits.append(dist <= radius)
        worst = max(worst, dist)
        free.remove(k)
    return free, tuple(hits), worst


def _pair_up(values: np.ndarray) -> np.ndarray:
    """Greedily merge a multiset of doubled values into one representative per pair."""
    rest = list(values)
    out = []
    while rest:
        a = rest.pop(0)
        if not rest:
            out.append(a)
            break
        k = int(np.argmin([abs(a - b) for b in rest]))
        b = rest.pop(k)
        out.append(0.5 * (a + b))
    return np.array(out, dtype=complex)


def _pair_type(square: complex, tol: float, scale: float) -> str:
    # a vanishing pair sits in a 2x2 Jordan block, so lambda itself is only
    # resolved to ~sqrt(eps); test the well-conditioned square instead
    if abs(square) <= tol * scale * scale:
        return "zero"
    lam = np.sqrt(complex(square))
    if abs(lam.real) <= tol * scale:
        return "imaginary"
    if abs(lam.imag) <= tol * scale:
        return "real"
    return "complex"


def vperp_basis(re: RelativeEquilibrium) -> np.ndarray:
    """Orthonormal basis of ``V^perp``, the M-orthogonal complement of ``span{z0, K z0}``."""
    z, g, _ = _unpack(re)
    m = np.repeat(g, 2)
    rows = np.vstack([m * z, m * apply_K(z)])
    return scipy.linalg.null_space(rows)


def _jordan_check(re, mu, V, same_sign: bool) -> bool:
    if same_sign:
        g = re.circulations.gamma
        m = np.abs(np.repeat(g, 2))
        gram = V.T @ (m[:, None] * V)
        return bool(np.max(np.abs(gram - np.eye(V.shape[1]))) < 1e-8)
    Q = vperp_basis(re)
    Br = Q.T @ stability_matrix(re) @ Q
    _, W = np.linalg.eig(Br)
    return bool(np.linalg.cond(W) < JORDAN_COND_MAX)


def is_L_zero(c: CircLike) -> bool:
    g = as_gamma(c)
    iu = np.triu_indices(g.size, 1)
    scale = max(1.0, float(np.sum(np.abs(np.outer(g, g))[iu])))
    return abs(vortex_angular_momentum(g)) <= L_ZERO_TOL * scale


def classify(re: RelativeEquilibrium, tol: float = DEFAULT_TOL) -> SpectralReport:
    """Classify ``re`` as Degenerate, Unstable, SpectrallyStable or LinearlyStable.

    The nontrivial eigenvalues of B are built from the reduced spectrum; an
    equilibrium with ``L = 0`` is reported Degenerate outright since two
    nontrivial eigenvalues vanish identically there.  A pair counts as zero
    when ``|lambda^2| <= tol * max(1, |omega|)^2``; real/imaginary decisions
    use ``tol * max(1, |omega|)`` on the parts of ``lambda``.

    Raises
    ------
    InconsistencyError
        If C has no eigenvalues near ``{0, 0, omega, -omega}``.
    """
    z, g, w = _unpack(re)
    n = g.size
    if n < 2:
        raise ValueError("need at least two vortices")
    mu, V = reduced_spectrum(re)
    free, hits, err = _match_trivial(mu, w)
    if not all(hits):
        raise InconsistencyError(
            f"trivial eigenvalues not found within tolerance (error {err:.3e}); "
            "is this really a relative equilibrium?")
    rest = mu[free]
    squares = _pair_up(rest.astype(complex) ** 2 - w * w)
    lams = np.sqrt(squares)
    nontrivial = np.concatenate([lams, -lams]) if lams.size else np.zeros(0, complex)
    scale = max(1.0, abs(w))
    types = tuple(_pair_type(q, tol, scale) for q in squares)
    margin = float(np.min(-squares.real)) if squares.size else np.inf
    full = np.linalg.eigvals(stability_matrix(re))
    same_sign = bool(np.all(g > 0) or np.all(g < 0))
    notes = []
    if np.sum(np.abs(rest) < TRIVIAL_RADIUS * max(1.0, abs(w))) >= 2:
        notes.append("repeated +-i*omega eigenvalues")
    L_zero = is_L_zero(g)
    jordan = None
    if L_zero:
        cls = Stability.DEGENERATE
        notes.append("L = 0: V lies inside its M-orthogonal complement")
    elif any(t == "zero" for t in types):
        cls = Stability.DEGENERATE
    elif any(t != "imaginary" for t in types):
        cls = Stability.UNSTABLE
    else:
        jordan = _jordan_check(re, mu, V, same_sign)
        cls = Stability.LINEARLY_STABLE if jordan else Stability.SPECTRALLY_STABLE
    return SpectralReport(
        omega=w,
        full_eigenvalues=full,
        reduced_eigenvalues=mu,
        nontrivial_eigenvalues=nontrivial,
        pair_squares=squares,
        pair_types=types,
        trivial_matched=hits,
        trivial_error=err,
        classification=cls,
        jordan_ok=jordan,
        margin=margin,
        L_zero=L_zero,
        notes=tuple(notes),
    )


def tangent_basis(re: RelativeEquilibrium) -> np.ndarray:
    """Orthonormal basis of ``T_{z0} S = {v : v^T M z0 = 0}``."""
    z, g, _ = _unpack(re)
    return scipy.linalg.null_space((np.repeat(g, 2) * z)[None, :])


def morse_data(re: RelativeEquilibrium, tol: Optional[float] = None) -> MorseData:
    """Nullity and index of ``H`` restricted to the level set ``I = I(z0)``.

    ``tol`` defaults to ``1e-8 * max(1, ||D2H + omega M||_2)``.
    """
    z, g, w = _unpack(re)
    D2G = hessian_H(z, g) + w * circulation_matrix(g)
    if tol is None:
        tol = DEFAULT_TOL * max(1.0, float(np.linalg.norm(D2G, 2)))
    Q = tangent_basis(re)
    ev = np.linalg.eigvalsh(Q.T @ D2G @ Q)
    return MorseData(nullity=int(np.sum(np.abs(ev) <= tol)),
                     index=int(np.sum(ev < -tol)),
                     eigenvalues=ev, tol=float(tol))


@dataclass(frozen=True)
class IdentityReport:
    """Max residuals of the structural identities of H at one configuration.

    ``scaled`` holds the same residuals divided by natural magnitudes so they
    are invariant under rescaling ``z``.
    """

    homogeneity: float
    rotation: float
    anticommutation: float
    equilibrium_eigvec: Optional[float]
    scaled: dict

    def max_residual(self) -> float:
        vals = [self.homogeneity, self.rotation, self.anticommutation]
        if self.equilibrium_eigvec is not None:
            vals.append(self.equilibrium_eigvec)
        return max(vals)

    def to_dict(self) -> dict:
        return {"homogeneity": self.homogeneity, "rotation": self.rotation,
                "anticommutation": self.anticommutation,
                "equilibrium_eigvec": self.equilibrium_eigvec, "scaled": self.scaled}


def verify_identities(z: ConfigLike, c: CircLike, omega: Optional[float] = None) -> IdentityReport:
    """Evaluate ``grad H . z + L``, ``grad H . K z``, ``D2H K + K D2H`` and,
    when ``omega`` is given, ``M^{-1} D2H z - omega z``."""
    z = as_z(z)
    g = as_gamma(c)
    L = vortex_angular_momentum(g)
    gh = grad_H(z, g)
    D2H = hessian_H(z, g)
    Kz = apply_K(z)
    r1 = abs(float(gh @ z) + L)
    r2 = abs(float(gh @ Kz))
    K = K_matrix(g.size)
    r3 = float(np.max(np.abs(D2H @ K + K @ D2H)))
    iu = np.triu_indices(g.size, 1)
    lscale = max(float(np.sum(np.abs(np.outer(g, g))[iu])), 1e-300)
    zn = float(np.linalg.norm(z))
    scaled = {
        "homogeneity": r1 / lscale,
        "rotation": r2 / max(float(np.linalg.norm(gh)) * zn, 1e-300),
        "anticommutation": r3 / max(float(np.max(np.abs(D2H))), 1e-300),
    }
    r4 = None
    if omega is not None:
        m = np.repeat(g, 2)
        r4 = float(np.max(np.abs(D2H @ z / m - omega * z)))
        scaled["equilibrium_eigvec"] = r4 / max(abs(omega) * float(np.max(np.abs(z))), 1e-300)
    return IdentityReport(r1, r2, r3, r4, scaled)


def nontrivial_squares_mp(points, gamma, dps: int = 40) -> list:
    """Extended-precision ``lambda^2 = mu^2 - omega^2`` for same-signed circulations.

    ``points`` is a sequence of ``(x, y)`` pairs given as mpmath numbers (or
    anything mpmath can convert exactly).  A vanishing nontrivial pair is only
    resolved to ``~sqrt(eps)`` in double precision, so degenerate equilibria
    with closed-form coordinates are checked here instead.  Returns the
    ``n - 2`` squares sorted by magnitude, as mpf.
    """
    import mpmath

    with mpmath.workdps(dps):
        g = [mpmath.mpf(x) for x in gamma]
        if not (all(x > 0 for x in g) or all(x < 0 for x in g)):
            raise ValueError("extended-precision path needs same-signed circulations")
        p = [(mpmath.mpf(x), mpmath.mpf(y)) for x, y in points]
        n = len(g)
        S = mpmath.zeros(2 * n, 2 * n)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                dx, dy = p[i][0] - p[j][0], p[i][1] - p[j][1]
                r2 = dx * dx + dy * dy
                s = g[i] * g[j] / (r2 * r2)
                a, b = s * (dy * dy - dx * dx), -2 * s * dx * dy
                w = 1 / mpmath.sqrt(abs(g[i] * g[j]))
                S[2 * i, 2 * j], S[2 * i, 2 * j + 1] = a * w, b * w
                S[2 * i + 1, 2 * j], S[2 * i + 1, 2 * j + 1] = b * w, -a * w
                S[2 * i, 2 * i] -= a / abs(g[i])
                S[2 * i, 2 * i + 1] -= b / abs(g[i])
                S[2 * i + 1, 2 * i] -= b / abs(g[i])
                S[2 * i + 1, 2 * i + 1] += a / abs(g[i])
        mu = mpmath.eigsy(S, eigvals_only=True)
        I = sum(g[i] * (p[i][0] ** 2 + p[i][1] ** 2) for i in range(n)) / 2
        L = sum(g[i] * g[j] for i in range(n) for j in range(i + 1, n))
        omega = L / (2 * I)
        # |M|^{-1/2} scaling flips the spectrum when all circulations are negative
        mu = [x if g[0] > 0 else -x for x in mu]
        sq = sorted((x * x - omega * omega for x in mu), key=abs)
        # drop two copies of 0 (mu = +-omega) and two of -omega^2 (mu = 0)
        for target in (0, 0, -omega * omega, -omega * omega):
            k = min(range(len(sq)), key=lambda i: abs(sq[i] - target))
            sq.pop(k)
        out = []
        while sq:
            a = sq.pop(0)
            if sq:
                sq.pop(min(range(len(sq)), key=lambda i: abs(sq[i] - a)))
            out.append(a)
        return sorted(out, key=abs)
