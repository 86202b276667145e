"""Finding relative equilibria.

Three routes are provided:

* :func:`refine` -- Gauss-Newton on the bordered system
  ``{grad H + omega M z = 0, I(z) = i0, gauge(z) = 0}`` in the unknowns
  ``(z, omega)``.  The normalisation row removes the scaling symmetry and the
  gauge row the rotation, so the Jacobian has full column rank at every
  nondegenerate equilibrium.
* :func:`minimize_on_sphere` -- projected gradient descent of H on the
  ellipsoid ``I = i0`` (positive circulations only), finished by ``refine``.
* :func:`collinear` -- the unique collinear equilibrium for a prescribed
  ordering of the vortices along a line.

:func:`multistart` runs ``refine`` from random seeds and merges the results
into classes modulo rotation, reflection, scaling and relabelling.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .derivatives import apply_K, grad_H, hessian_H, residual
from .errors import (CollisionError, ConvergenceError, DegenerateEquilibriumWarning,
                     VortexError)
from .model import (CirculationSet, Configuration, RelativeEquilibrium, angular_impulse,
                    as_gamma, as_z, hamiltonian, pairwise_distances, recenter)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-11
    max_iter: int = 100
    i0: float = 1.0
    #: "first" pins vortex 1 to the positive x-axis; "farthest" pins the vortex
    #: farthest from the center of vorticity
    gauge: str = "first"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.i0 > 0:
            raise ValueError("i0 must be positive")
        if self.gauge not in ("first", "farthest"):
            raise ValueError(f"unknown gauge rule {self.gauge!r}")


DEFAULT_OPTIONS = SolveOptions()
#: |I| below this fraction of sum |G_i| |z_i|^2 / 2 switches to the unweighted moment.
_SMALL_I = 1e-3
#: Jacobian singular-value ratio below which an equilibrium is flagged degenerate.
_RANK_RTOL = 1e-9


def _circ(c) -> CirculationSet:
    return c if isinstance(c, CirculationSet) else CirculationSet(c)


def _norm_kind(z: np.ndarray, g: np.ndarray) -> str:
    p = z.reshape(-1, 2)
    r2 = np.sum(p * p, axis=1)
    weighted = 0.5 * float(np.abs(g) @ r2)
    return "I" if abs(0.5 * float(g @ r2)) > _SMALL_I * weighted else "moment"


def _norm_value(z: np.ndarray, g: np.ndarray, kind: str) -> float:
    p = z.reshape(-1, 2)
    w = g if kind == "I" else np.ones_like(g)
    return 0.5 * float(w @ np.sum(p * p, axis=1))


def normalize(z, c, i0: float = 1.0) -> np.ndarray:
    """Recenter and rescale so that ``|I| = i0``.

    Falls back to the unweighted moment ``sum |z_i|^2 / 2`` when ``I`` is
    (nearly) zero, which happens for mixed signs.
    """
    g = as_gamma(c)
    z = recenter(z, g)
    kind = _norm_kind(z, g)
    val = _norm_value(z, g, kind)
    return z * math.sqrt(i0 / abs(val))


def scale_of(z, c) -> float:
    """The quantity :func:`normalize` fixes: ``|I|`` or, when I is nearly zero,
    the unweighted moment, evaluated after recentering."""
    g = as_gamma(c)
    z = recenter(z, g)
    return abs(_norm_value(z, g, _norm_kind(z, g)))


def _gauge_index(z: np.ndarray, rule: str) -> int:
    r = np.hypot(*z.reshape(-1, 2).T)
    if rule == "first" and r[0] > 1e-3 * r.max():
        return 0
    return int(np.argmax(r))


def _rotate_to_axis(z: np.ndarray, k: int) -> np.ndarray:
    p = z.reshape(-1, 2)
    theta = math.atan2(p[k, 1], p[k, 0])
    cs, sn = math.cos(theta), math.sin(theta)
    R = np.array([[cs, sn], [-sn, cs]])
    out = p @ R.T
    out[k, 1] = 0.0
    return out.ravel()


def _lsq_omega(z: np.ndarray, g: np.ndarray) -> float:
    mz = np.repeat(g, 2) * z
    return -float(mz @ grad_H(z, g)) / float(mz @ mz)


def refine(z_guess, c, opts: SolveOptions = DEFAULT_OPTIONS,
           omega_guess: Optional[float] = None) -> RelativeEquilibrium:
    """Newton-refine ``z_guess`` to a relative equilibrium.

    The guess is recentered, rotated so the gauge vortex lies on the positive
    x-axis and scaled to ``|I| = opts.i0`` (sign of I preserved).

    Raises
    ------
    ConvergenceError
        No convergence within ``opts.max_iter`` iterations, or convergence to
        a fixed point (omega = 0).
    CollisionError
        The iteration ran into a collision.
    """
    circ = _circ(c)
    g = circ.gamma
    n = g.size
    m = np.repeat(g, 2)
    z = normalize(as_z(z_guess), g, opts.i0)
    kind = _norm_kind(z, g)
    target = _norm_value(z, g, kind)
    k = _gauge_index(z, opts.gauge)
    z = _rotate_to_axis(z, k)
    omega = _lsq_omega(z, g) if omega_guess is None else float(omega_guess)
    w_norm = m if kind == "I" else np.ones_like(m)

    def F(z, omega):
        return np.concatenate([residual(z, omega, g),
                               [_norm_value(z, g, kind) - target, z[2 * k + 1]]])

    def jac(z, omega):
        Jm = np.zeros((2 * n + 2, 2 * n + 1))
        Jm[:2 * n, :2 * n] = hessian_H(z, g) + omega * np.diag(m)
        Jm[:2 * n, 2 * n] = m * z
        Jm[2 * n, :2 * n] = w_norm * z
        Jm[2 * n + 1, 2 * k + 1] = 1.0
        return Jm

    f = F(z, omega)
    it = 0
    while np.max(np.abs(f)) >= opts.tol:
        if it >= opts.max_iter:
            raise ConvergenceError(
                f"refine did not converge in {opts.max_iter} iterations "
                f"(residual {np.max(np.abs(f)):.3e})", float(np.max(np.abs(f))), it)
        it += 1
        step = np.linalg.lstsq(jac(z, omega), -f, rcond=None)[0]
        fnorm = np.linalg.norm(f)
        alpha = 1.0
        while True:
            zt = z + alpha * step[:-1]
            wt = omega + alpha * step[-1]
            try:
                ft = F(zt, wt)
                if np.all(np.isfinite(ft)) and (np.linalg.norm(ft) < fnorm or alpha < 1e-3):
                    break
            except CollisionError:
                pass
            alpha *= 0.5
            if alpha < 1e-8:
                raise CollisionError("refine drifted into a collision")
        z, omega, f = zt, wt, ft
        pr = pairwise_distances(z)
        if pr.min() < 1e-9 * math.sqrt(opts.i0):
            raise CollisionError(f"refine approached a collision (r_min = {pr.min():.2e})")

    if abs(omega) < 1e-10:
        raise ConvergenceError("converged to a fixed point (omega = 0), not a relative equilibrium",
                               float(np.max(np.abs(f))), it)
    p = z.reshape(-1, 2)
    if p[k, 0] < 0:
        z = -z
    z[2 * k + 1] = 0.0
    sv = np.linalg.svd(jac(z, omega), compute_uv=False)
    degenerate = bool(sv[-1] < _RANK_RTOL * sv[0])
    if degenerate:
        warnings.warn("Jacobian is rank deficient beyond the rotation and scaling symmetries; "
                      "the equilibrium is degenerate", DegenerateEquilibriumWarning, stacklevel=2)
    res = float(np.max(np.abs(residual(z, omega, g))))
    return RelativeEquilibrium(Configuration(z), float(omega), res, circ, it,
                               meta={"normalization": kind, "gauge_vortex": k,
                                     "degenerate_jacobian": degenerate,
                                     "jacobian_sv_ratio": float(sv[-1] / sv[0])})


def _tangent_descent(z, g, i0, max_steps, grad_tol, c1=1e-4):
    """Armijo projected gradient descent of H on ``I = i0`` in the M metric."""
    m = np.repeat(g, 2)
    z = normalize(z, g, i0)
    h = hamiltonian(z, g)
    alpha = 0.1
    for _ in range(max_steps):
        gr = grad_H(z, g)
        # M^{-1} grad projected M-orthogonally onto the tangent space of I = i0
        d = -(gr / m - (gr @ z) / (z @ (m * z)) * z)
        slope = float(gr @ d)
        if math.sqrt(abs(d @ (m * d))) < grad_tol:
            break
        alpha = min(2.0 * alpha, 1.0)
        while True:
            zt = z + alpha * d
            try:
                zt = zt * math.sqrt(i0 / angular_impulse(zt, g))
                ht = hamiltonian(zt, g)
                if pairwise_distances(zt).min() > 0 and ht <= h + c1 * alpha * slope:
                    break
            except (CollisionError, ValueError):
                pass
            alpha *= 0.5
            if alpha < 1e-14:
                return z
        z, h = recenter(zt, g), ht
    return z


def minimize_on_sphere(z_init, c, opts: SolveOptions = DEFAULT_OPTIONS,
                       max_steps: int = 20000, grad_tol: float = 1e-6,
                       restarts: int = 5) -> RelativeEquilibrium:
    """Minimise H on the ellipsoid ``I = i0`` and polish with :func:`refine`.

    If the polished point is a saddle (positive Morse index) the descent is
    restarted from a small push along the most negative direction.

    Raises
    ------
    ValueError
        Some circulation is not positive (the level set is then not compact).
    """
    from .spectral import morse_data, tangent_basis

    circ = _circ(c)
    if not circ.all_positive:
        raise ValueError("minimize_on_sphere requires all circulations positive")
    g = circ.gamma
    z = as_z(z_init)
    for attempt in range(restarts + 1):
        z = _tangent_descent(z, g, opts.i0, max_steps, grad_tol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEquilibriumWarning)
            re = refine(z, circ, opts)
        md = morse_data(re)
        if md.index == 0:
            if md.nullity > 1:
                warnings.warn("minimiser is degenerate (nullity > 1)",
                              DegenerateEquilibriumWarning, stacklevel=2)
            return replace(re, meta={**re.meta, "morse": (md.nullity, md.index),
                                     "restarts": attempt})
        Q = tangent_basis(re)
        D2G = hessian_H(re.z, g) + re.omega * np.diag(np.repeat(g, 2))
        ev, U = np.linalg.eigh(Q.T @ D2G @ Q)
        z = re.z + 0.05 * np.linalg.norm(re.z) * (Q @ U[:, 0])
    raise ConvergenceError(f"minimize_on_sphere stuck at a saddle after {restarts} restarts")


def _check_ordering(ordering, n) -> list:
    ordering = [int(i) for i in ordering]
    if sorted(ordering) != list(range(n)):
        raise ValueError(f"ordering must be a permutation of 0..{n - 1}, got {ordering}")
    return ordering


def collinear(c, ordering: Sequence[int], opts: SolveOptions = DEFAULT_OPTIONS) -> RelativeEquilibrium:
    """Collinear relative equilibrium with the vortices in ``ordering`` along the x-axis.

    ``ordering[k]`` is the (0-based) label of the k-th vortex from the left.
    Solved on the line: descent of H restricted to the ordered cell of
    ``I = i0`` followed by Newton on ``omega x_i = sum_j G_j / (x_i - x_j)``.

    Raises
    ------
    ValueError
        Invalid ordering or non-positive circulations.
    ConvergenceError
        Newton failed to converge.
    """
    circ = _circ(c)
    g = circ.gamma
    n = g.size
    ordering = _check_ordering(ordering, n)
    if not circ.all_positive:
        raise ValueError("collinear enumeration assumes positive circulations")
    if n < 2:
        raise ValueError("need at least two vortices")
    x = np.empty(n)
    x[ordering] = np.linspace(-1.0, 1.0, n)
    rank = np.empty(n, dtype=int)
    rank[ordering] = np.arange(n)

    def center_scale(x):
        x = x - g @ x / g.sum()
        return x * math.sqrt(opts.i0 / (0.5 * float(g @ (x * x))))

    def ordered(x):
        return np.all(np.diff(x[ordering]) > 0)

    def H1(x):
        d = np.abs(x[:, None] - x[None, :])
        iu = np.triu_indices(n, 1)
        return -float(np.sum(np.outer(g, g)[iu] * np.log(d[iu])))

    def grad1(x):
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, np.inf)
        return -g * np.sum(g[None, :] / d, axis=1)

    x = center_scale(x)
    h = H1(x)
    alpha = 0.1
    for _ in range(2000):
        gr = grad1(x)
        d = -(gr / g - (gr @ x) / (x @ (g * x)) * x)
        if math.sqrt(d @ (g * d)) < 1e-4:
            break
        alpha = min(2 * alpha, 1.0)
        accepted = False
        while alpha > 1e-14:
            xt = center_scale(x + alpha * d)
            if ordered(xt):
                ht = H1(xt)
                if ht <= h + 1e-4 * alpha * float(gr @ d):
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        x, h = xt, ht

    omega = -float((g * x) @ grad1(x)) / float((g * x) @ (g * x))
    it = 0
    for it in range(1, opts.max_iter + 1):
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, np.inf)
        F = np.concatenate([grad1(x) + omega * g * x, [0.5 * float(g @ (x * x)) - opts.i0]])
        if np.max(np.abs(F)) < opts.tol:
            break
        Jm = np.zeros((n + 1, n + 1))
        off = np.outer(g, g) / d ** 2
        Jm[:n, :n] = -off
        Jm[np.arange(n), np.arange(n)] = off.sum(axis=1) + omega * g
        Jm[:n, n] = g * x
        Jm[n, :n] = g * x
        step = np.linalg.solve(Jm, -F)
        a = 1.0
        while not ordered(x + a * step[:n]) and a > 1e-10:
            a *= 0.5
        x = x + a * step[:n]
        omega += a * step[n]
    else:
        raise ConvergenceError(f"collinear Newton failed for ordering {ordering}",
                               float(np.max(np.abs(F))), it)
    z = np.zeros(2 * n)
    z[0::2] = x - g @ x / g.sum()
    res = float(np.max(np.abs(residual(z, omega, g))))
    return RelativeEquilibrium(Configuration(z), float(omega), res, circ, it,
                               meta={"ordering": tuple(ordering), "collinear": True})


def collinear_orderings(n: int) -> list:
    """One ordering per class modulo reversal: ``n!/2`` of them for ``n >= 2``."""
    return [p for p in itertools.permutations(range(n)) if p[0] < p[-1]]


def collinear_all(c, opts: SolveOptions = DEFAULT_OPTIONS) -> list:
    g = as_gamma(c)
    return [collinear(c, p, opts) for p in collinear_orderings(g.size)]


def is_collinear(z, tol: float = 1e-8) -> bool:
    p = as_z(z).reshape(-1, 2)
    p = p - p.mean(axis=0)
    s = np.linalg.svd(p, compute_uv=False)
    return bool(s[-1] <= tol * max(s[0], 1e-300)) if len(s) > 1 else True


def fingerprint(re_or_z, c=None, i0: float = 1.0) -> np.ndarray:
    """Sorted mutual distances after normalising to ``|I| = i0``.

    Invariant under rotation, reflection, scaling and relabelling.
    """
    if isinstance(re_or_z, RelativeEquilibrium):
        z, g = re_or_z.z, re_or_z.gamma
    else:
        z, g = as_z(re_or_z), as_gamma(c)
    return np.sort(pairwise_distances(normalize(z, g, i0)))


def random_seed_configuration(n: int, rng: np.random.Generator, rmin: float = 0.2,
                              rmax: float = 2.0) -> np.ndarray:
    """Positions uniform (by area) in the annulus ``rmin <= |z_i| <= rmax``."""
    while True:
        r = np.sqrt(rng.uniform(rmin ** 2, rmax ** 2, n))
        th = rng.uniform(0.0, 2 * np.pi, n)
        z = np.column_stack([r * np.cos(th), r * np.sin(th)]).ravel()
        if n < 2 or pairwise_distances(z).min() > 1e-3:
            return z


def _refine_task(args):
    z, gamma, opts = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEquilibriumWarning)
        try:
            return refine(z, gamma, opts)
        except (VortexError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError):
            return None


def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes to use: ``requested`` capped by ``VORTEX_NUM_THREADS``."""
    cap = os.environ.get("VORTEX_NUM_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def dedupe(equilibria, i0: float = 1.0, tol: float = 1e-6) -> list:
    """Merge equilibria with equal fingerprints; output sorted by fingerprint."""
    classes: list = []
    prints: list = []
    for re in equilibria:
        fp = fingerprint(re, i0=i0)
        for j, q in enumerate(prints):
            if q.shape == fp.shape and np.max(np.abs(q - fp)) < tol:
                classes[j][1] += 1
                break
        else:
            prints.append(fp)
            classes.append([re, 1])
    order = sorted(range(len(prints)), key=lambda j: tuple(np.round(prints[j], 9)))
    return [replace(classes[j][0], meta={**classes[j][0].meta, "hits": classes[j][1]})
            for j in order]


def multistart(c, seeds: int, rng_seed: int = 0, opts: SolveOptions = DEFAULT_OPTIONS,
               workers: Optional[int] = None, return_stats: bool = False):
    """Refine from ``seeds`` random starts and return the distinct classes found.

    Starts are drawn uniformly in the annulus ``0.2 <= |z_i| <= 2``.  Failed
    solves are skipped and counted (see ``return_stats``).  Results do not
    depend on ``workers``.
    """
    circ = _circ(c)
    rng = np.random.default_rng(rng_seed)
    starts = [random_seed_configuration(circ.n, rng) for _ in range(seeds)]
    tasks = [(z, circ, opts) for z in starts]
    nw = worker_count(workers)
    if nw > 1 and seeds > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(_refine_task, tasks, chunksize=max(1, seeds // (4 * nw))))
    else:
        results = [_refine_task(t) for t in tasks]
    found = [r for r in results if r is not None]
    classes = dedupe(found, opts.i0)
    if return_stats:
        return classes, {"seeds": seeds, "converged": len(found), "failed": seeds - len(found)}
    return classes
