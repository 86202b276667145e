"""Time integration of the vortex equations and finite-horizon stability probes.

Inertial frame:   M dz/dt = K grad H(z)
Rotating frame:   M dz/dt = K (grad H(z) + omega M z)

A relative equilibrium with angular velocity ``omega`` is a fixed point of
the rotating system and rotates as ``exp(-omega J t) z0`` in the inertial
one.  Integration uses the Dormand-Prince 5(4) pair from scipy.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .derivatives import apply_K, grad_H, translation_vectors
from .errors import CollisionError, IntegrationError
from .model import (CircLike, CirculationSet, Configuration, ConfigLike, RelativeEquilibrium,
                    angular_impulse, as_gamma, as_z, hamiltonian, pairwise_distances)
from .solver import worker_count

#: Integration stops when any pair comes closer than this.
COLLISION_FLOOR = 1e-6


@dataclass(frozen=True)
class IntegrateOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    #: stored samples per unit time (at least two samples are always kept)
    density: float = 10.0
    max_step: float = np.inf
    collision_floor: float = COLLISION_FLOOR

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.density > 0:
            raise ValueError("density must be positive")


DEFAULT_INTEGRATE = IntegrateOptions()


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution together with its conserved quantities.

    ``G = H + omega I`` uses the frame angular velocity (``G = H`` when no
    ``omega`` was given).
    """

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    frame: str
    omega: Optional[float]
    H_series: np.ndarray = field(repr=False)
    I_series: np.ndarray = field(repr=False)
    G_series: np.ndarray = field(repr=False)
    collided: bool = False
    stopped: bool = False
    message: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def configurations(self) -> list:
        return [Configuration(s) for s in self.states]

    def drift(self) -> dict:
        """Largest relative change of H, I and G from their initial values."""
        out = {}
        for name, s in (("H", self.H_series), ("I", self.I_series), ("G", self.G_series)):
            out[name] = float(np.max(np.abs(s - s[0])) / max(1.0, abs(s[0])))
        return out

    def to_csv(self, path) -> None:
        """Write columns ``t, x_1, y_1, ..., x_n, y_n, H, I, G`` with 17 significant digits."""
        n = self.states.shape[1] // 2
        cols = ["t"] + [f"{a}_{i}" for i in range(1, n + 1) for a in ("x", "y")] + ["H", "I", "G"]
        data = np.column_stack([self.times, self.states, self.H_series, self.I_series,
                                self.G_series])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")


def vector_field(z: np.ndarray, g: np.ndarray, omega: Optional[float] = None) -> np.ndarray:
    """Right-hand side ``M^{-1} K (grad H + omega M z)`` (``omega=None``: inertial)."""
    f = grad_H(z, g)
    m = np.repeat(g, 2)
    if omega is not None:
        f = f + omega * m * z
    return apply_K(f) / m


def _sample_times(t0: float, t1: float, density: float) -> np.ndarray:
    k = max(2, int(math.ceil(abs(t1 - t0) * density)) + 1)
    return np.linspace(t0, t1, k)


def integrate(z_init: ConfigLike, c: CircLike, t_span=(0.0, 1.0), frame: str = "inertial",
              omega: Optional[float] = None,
              opts: IntegrateOptions = DEFAULT_INTEGRATE, stop=None) -> Trajectory:
    """Integrate the vortex equations over ``t_span`` (which may run backwards).

    Parameters
    ----------
    frame : {"inertial", "rotating"}
        The rotating frame needs ``omega``.  In the inertial frame ``omega``
        only enters the reported ``G`` series.
    stop : callable, optional
        ``stop(t, z)``; integration ends where it crosses zero from below
        (``stopped=True`` in the result).

    Returns
    -------
    Trajectory
        Truncated with ``collided=True`` if two vortices came closer than
        ``opts.collision_floor``.

    Raises
    ------
    CollisionError
        The initial data already violates the collision floor.
    IntegrationError
        The step size underflowed or the solver failed otherwise.
    """
    if frame not in ("inertial", "rotating"):
        raise ValueError(f"frame must be 'inertial' or 'rotating', got {frame!r}")
    if frame == "rotating" and omega is None:
        raise ValueError("the rotating frame needs omega")
    z0 = as_z(z_init).astype(float)
    g = as_gamma(c)
    if z0.size != 2 * g.size:
        raise ValueError("positions and circulations disagree on n")
    if g.size > 1 and pairwise_distances(z0).min() < opts.collision_floor:
        raise CollisionError("initial data is inside the collision floor")
    w_rhs = omega if frame == "rotating" else None
    t0, t1 = map(float, t_span)

    def rhs(t, z):
        return vector_field(z, g, w_rhs)

    def near_collision(t, z):
        return pairwise_distances(z).min() - opts.collision_floor

    near_collision.terminal = True
    near_collision.direction = -1
    events = [near_collision] if g.size > 1 else []
    if stop is not None:
        def stop_event(t, z):
            return stop(t, z)

        stop_event.terminal = True
        stop_event.direction = 1
        events.append(stop_event)
    sol = solve_ivp(rhs, (t0, t1), z0, method="RK45", t_eval=_sample_times(t0, t1, opts.density),
                    rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step,
                    events=events or None)
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    times = sol.t
    states = sol.y.T
    collided = stopped = False
    if sol.status == 1:
        # keep the event instant as the last sample
        k = next(i for i, te in enumerate(sol.t_events) if te.size)
        collided = g.size > 1 and k == 0
        stopped = not collided
        times = np.append(times, sol.t_events[k][0])
        states = np.vstack([states, sol.y_events[k][0]])
    H = np.array([hamiltonian(s, g) for s in states])
    I = np.array([angular_impulse(s, g) for s in states])
    G = H + (0.0 if omega is None else omega) * I
    return Trajectory(times, states, g, frame, omega, H, I, G, collided, stopped, sol.message)


def distance_to_orbit(zeta: np.ndarray, z0: np.ndarray) -> float:
    """``min_theta || zeta - exp(J theta) z0 ||`` in closed form.

    ``<zeta, exp(J theta) z0> = a cos(theta) + b sin(theta)`` with
    ``a = <zeta, z0>`` and ``b = <zeta, K z0>``, so the maximum is ``hypot(a, b)``.
    """
    zeta = np.asarray(zeta, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    a = float(zeta @ z0)
    b = float(zeta @ apply_K(z0))
    d2 = float(zeta @ zeta) + float(z0 @ z0) - 2.0 * math.hypot(a, b)
    return math.sqrt(max(d2, 0.0))


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of one perturbed run around an equilibrium.

    ``max_distance`` is the largest distance to the orbit circle seen on the
    samples of the forward and backward runs over ``[-T, T]``.
    """

    delta: float
    max_distance: float
    T: float
    escaped: bool
    #: time at which ``max_distance`` was attained
    t_max: float = 0.0
    #: first time the distance reached ``escape_distance`` (None if it never did)
    exit_time: Optional[float] = None
    message: str = ""


def perturbation(re: RelativeEquilibrium, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Random vector of Euclidean norm ``delta``, M-orthogonal to the translations."""
    g = re.gamma
    m = np.repeat(g, 2)
    v = rng.standard_normal(2 * g.size)
    for t in translation_vectors(g.size):
        v = v - (t @ (m * v)) / (t @ (m * t)) * t
    nv = np.linalg.norm(v)
    return v * (delta / nv) if nv > 0 else v


def _probe_task(args):
    z0, g, omega, delta, horizon, seq, opts, escape = args
    re = RelativeEquilibrium(Configuration(z0), omega, 0.0, CirculationSet(g))
    zeta0 = z0 + perturbation(re, delta, np.random.default_rng(seq))
    best, t_best, escaped, msgs = distance_to_orbit(zeta0, z0), 0.0, False, []
    exit_time = None
    stop = None if escape is None else (lambda t, z: distance_to_orbit(z, z0) - escape)
    for t1 in (horizon, -horizon):
        try:
            tr = integrate(zeta0, g, (0.0, t1), "rotating", omega, opts, stop)
        except (IntegrationError, CollisionError, FloatingPointError) as exc:
            escaped = True
            msgs.append(str(exc))
            continue
        d = np.array([distance_to_orbit(s, z0) for s in tr.states])
        k = int(np.argmax(d))
        if d[k] > best:
            best, t_best = float(d[k]), float(tr.times[k])
        if tr.collided:
            escaped = True
            msgs.append(f"collision near t = {tr.times[-1]:.6g}")
        if tr.stopped:
            escaped = True
            te = float(tr.times[-1])
            if exit_time is None or abs(te) < abs(exit_time):
                exit_time = te
    return ProbeResult(float(delta), best, float(horizon), escaped, t_best, exit_time,
                       "; ".join(msgs))


def probe_stability(re: RelativeEquilibrium, delta: float, horizon: float, samples: int = 8,
                    rng_seed: int = 0, opts: IntegrateOptions = DEFAULT_INTEGRATE,
                    workers: Optional[int] = None,
                    escape_distance: Optional[float] = None) -> list:
    """Perturb ``re`` randomly and track the distance to its orbit circle.

    Each sample draws an isotropic perturbation of norm ``delta``, removes its
    translation component and integrates in the rotating frame forward and
    backward over ``horizon``.  A bounded ``max_distance`` is evidence of
    stability on ``[-horizon, horizon]`` only.  Results depend on
    ``rng_seed`` but not on ``workers``.

    With ``escape_distance`` set, each run stops once the orbit distance
    reaches it; the sample is then marked ``escaped`` with its ``exit_time``.
    Integration failures and collisions also mark a sample ``escaped``.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    seqs = np.random.SeedSequence(rng_seed).spawn(samples)
    tasks = [(np.array(re.z), np.array(re.gamma), float(re.omega), float(delta), float(horizon),
              s, opts, escape_distance) for s in seqs]
    nw = worker_count(workers)
    if nw > 1 and samples > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            return list(ex.map(_probe_task, tasks))
    return [_probe_task(t) for t in tasks]
