"""Command-line front end.

Subcommands::

    analyze   refine an input configuration and report its stability
    family    sweep a closed-form family and emit CSV rows
    census    search for all equilibria of given circulations
    simulate  integrate the equations of motion and write a CSV trajectory
    probe     finite-horizon nonlinear stability probe
    repro     rerun the reference checks on the closed-form families

Exit codes: 0 success, 1 numeric failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from typing import Optional

import numpy as np

from . import dynamics, families, solver, spectral
from .errors import DegenerateEquilibriumWarning, VortexError
from .model import CirculationSet, Configuration, RelativeEquilibrium, angular_velocity

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

FAMILY_NAMES = {
    "triangle": families.Family.TRIANGLE,
    "rhombus": None,  # branch chosen with --branch
    "rhombusa": families.Family.RHOMBUS_A,
    "rhombusb": families.Family.RHOMBUS_B,
    "trapezoid": families.Family.TRAPEZOID,
    "ngon": families.Family.NGON,
    "collinear3": families.Family.COLLINEAR3,
}


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


def _fmt(x: float) -> str:
    return "%.17g" % x


# ----------------------------------------------------------------------------- input


def _parse_gamma(text: Optional[str]) -> Optional[list]:
    if text is None:
        return None
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise UsageError(f"--gamma must be comma-separated numbers: {exc}") from None


def read_input(path: str, gamma_override: Optional[list] = None):
    """Load ``{"gamma": [...], "z": [...]}`` from a file (``-`` for stdin)."""
    try:
        if path == "-":
            data = json.load(sys.stdin)
        else:
            with open(path) as fh:
                data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict) or "z" not in data:
        raise UsageError("input JSON must be an object with fields 'gamma' and 'z'")
    gamma = gamma_override if gamma_override is not None else data.get("gamma")
    if gamma is None:
        raise UsageError("no circulations: give 'gamma' in the JSON or --gamma")
    try:
        c = CirculationSet(gamma)
        z = Configuration(data["z"])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid input: {exc}") from None
    if z.n != c.n:
        raise UsageError(f"'z' describes {z.n} vortices but 'gamma' has {c.n}")
    return z, c


def _family_point(args, param: float) -> families.FamilyPoint:
    fam = _family_tag(args)
    if fam is families.Family.TRIANGLE:
        g = _parse_gamma(args.gamma) or [1.0, 1.0, 1.0]
        if len(g) != 3:
            raise UsageError("triangle needs three circulations")
        return families.triangle(*g)
    if fam in (families.Family.RHOMBUS_A, families.Family.RHOMBUS_B):
        return families.rhombus(param, "A" if fam is families.Family.RHOMBUS_A else "B")
    if fam is families.Family.TRAPEZOID:
        return families.trapezoid(param)
    if fam is families.Family.NGON:
        return families.ngon(int(round(param)))
    return families.collinear3()


def _family_tag(args) -> families.Family:
    key = (args.family or "").lower()
    if key not in FAMILY_NAMES:
        raise UsageError(f"unknown family {args.family!r}; choose from {sorted(FAMILY_NAMES)}")
    fam = FAMILY_NAMES[key]
    if fam is None:
        fam = families.Family.RHOMBUS_A if args.branch.upper() == "A" else families.Family.RHOMBUS_B
    return fam


def _equilibrium_from_args(args) -> RelativeEquilibrium:
    """Input equilibrium from ``--positions-json`` (refined) or ``--family``/``--param``."""
    if args.positions_json:
        z, c = read_input(args.positions_json, _parse_gamma(args.gamma))
        # keep the caller's length scale
        return solver.refine(z, c, solver.SolveOptions(i0=solver.scale_of(z, c)))
    if args.family:
        try:
            fp = _family_point(args, args.param)
            return fp.to_equilibrium()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError("give --positions-json or --family")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _emit_json(obj, out: Optional[str]) -> None:
    fh, close = _open_out(out)
    try:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True, default=_plain)
        fh.write("\n")
    finally:
        if close:
            fh.close()


# ----------------------------------------------------------------------------- reports


def equilibrium_dict(re: RelativeEquilibrium) -> dict:
    return {"gamma": [float(x) for x in re.gamma], "z": [float(x) for x in re.z],
            "omega": float(re.omega), "residual": float(re.residual)}


def analysis(re: RelativeEquilibrium, tol: float = spectral.DEFAULT_TOL) -> dict:
    rep = spectral.classify(re, tol)
    md = spectral.morse_data(re)
    ids = spectral.verify_identities(re.z, re.gamma, re.omega)
    return {"equilibrium": equilibrium_dict(re), "spectral": rep.to_dict(),
            "morse": md.to_dict(), "identities": ids.to_dict(),
            "L": float(re.circulations.L)}


def family_row(fp: families.FamilyPoint, tol: float = spectral.DEFAULT_TOL) -> dict:
    """One sweep row: parameter, omega, nontrivial eigenvalues, margin and classification."""
    row = {"parameter": fp.parameter, "omega": fp.omega, "family": fp.family.value}
    if fp.family in (families.Family.RHOMBUS_A, families.Family.RHOMBUS_B):
        row["y"] = float(fp.hat[5])
    if fp.special is not None:
        row.update(classification=fp.special.replace(" ", "_"), margin=math.nan, pairs=[])
        return row
    rep = spectral.classify(fp.to_equilibrium(), tol)
    half = rep.nontrivial_eigenvalues[: len(rep.pair_squares)]
    row.update(classification=rep.classification.value, margin=rep.margin,
               pairs=[(complex(l), t) for l, t in zip(half, rep.pair_types)])
    return row


def _sweep_values(args) -> np.ndarray:
    fam = _family_tag(args)
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if fam is families.Family.NGON:
        lo, hi = int(round(args.m_from)), int(round(args.m_to))
        return np.arange(lo, hi + 1, dtype=float)
    if fam in (families.Family.TRIANGLE, families.Family.COLLINEAR3):
        return np.array([0.0])
    if args.m_from is None or args.m_to is None:
        raise UsageError("--m-from and --m-to are required for this family")
    return np.linspace(args.m_from, args.m_to, args.steps)


def sweep_csv(rows: list) -> str:
    width = max((len(r["pairs"]) for r in rows), default=0)
    head = ["parameter", "omega"] + (["y"] if "y" in rows[0] else []) + ["classification",
                                                                           "margin"]
    for k in range(1, width + 1):
        head += [f"lambda{k}_re", f"lambda{k}_im", f"type{k}"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for r in rows:
        line = [_fmt(r["parameter"]), _fmt(r["omega"])]
        if "y" in r:
            line.append(_fmt(r["y"]))
        line += [r["classification"], _fmt(r["margin"])]
        for lam, t in r["pairs"]:
            line += [_fmt(lam.real), _fmt(lam.imag), t]
        line += [""] * (len(head) - len(line))
        w.writerow(line)
    return buf.getvalue()


def census(c: CirculationSet, seeds: int, rng_seed: int, workers: Optional[int] = None,
           tol: float = spectral.DEFAULT_TOL) -> dict:
    """Equilibrium classes of ``c`` with their stability.

    For positive circulations all ``n!/2`` collinear classes are enumerated
    directly (one per ordering) and a constrained minimiser adds the
    minimum of H on ``I = 1`` (when ``seeds > 0``); the random multistart
    supplies the rest.
    """
    entries = []
    positive = c.all_positive
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEquilibriumWarning)
        if positive:
            for re in solver.collinear_all(c):
                entries.append(("collinear", re))
        if positive and seeds > 0:
            rng = np.random.default_rng(rng_seed)
            try:
                m = solver.minimize_on_sphere(solver.random_seed_configuration(c.n, rng), c)
                extra = [m]
            except VortexError:
                extra = []
        else:
            extra = []
        found, stats = solver.multistart(c, seeds, rng_seed, workers=workers, return_stats=True)
    planar = solver.dedupe(extra + found)
    for re in planar:
        if positive and solver.is_collinear(re.z):
            continue  # already enumerated by ordering
        entries.append(("collinear" if solver.is_collinear(re.z) else "planar", re))
    classes = []
    for kind, re in entries:
        item = {"kind": kind, "hits": int(re.meta.get("hits", 0))}
        if "ordering" in re.meta:
            item["ordering"] = list(re.meta["ordering"])
        item.update(equilibrium_dict(re))
        try:
            rep = spectral.classify(re, tol)
            item["classification"] = rep.classification.value
            item["nontrivial_eigenvalues"] = [[float(l.real), float(l.imag)]
                                              for l in rep.nontrivial_eigenvalues]
        except VortexError as exc:
            item["classification"] = "error"
            item["error"] = str(exc)
        md = spectral.morse_data(re)
        item["morse"] = {"nullity": md.nullity, "index": md.index}
        classes.append(item)
    return {"gamma": [float(x) for x in c.gamma], "seeds": stats, "classes": classes}


# ----------------------------------------------------------------------------- repro


def repro(steps: int = 200) -> list:
    """Reference checks on closed-form families; each entry has ``name`` and ``ok``."""
    out = []
    K = families.rhombus_constants()
    out.append({"name": "rhombus constants", "m_star": K.m_star, "kappa": K.kappa,
                "ok": abs(K.m_star + 0.5951) < 5e-5 and abs(K.kappa - 0.1278) < 5e-5})

    tri = []
    for g in ([1, 1, 1], [1, 1, -0.4], [1, 1, -0.6], [1, 1, -0.5]):
        rep = spectral.classify(families.triangle(*g).to_equilibrium())
        tri.append((g, rep.classification.value))
    expect = ["LinearlyStable", "LinearlyStable", "Unstable", "Degenerate"]
    out.append({"name": "triangle criterion", "results": [t[1] for t in tri],
                "ok": [t[1] for t in tri] == expect})

    ms = [m for m in np.linspace(-0.99, 1.0, steps) if abs(m) > 1e-9]  # m = 0 is not admissible
    a = [(m, spectral.classify(families.rhombus(m, "A").to_equilibrium())) for m in ms]
    ok = all((r.classification is spectral.Stability.LINEARLY_STABLE) == (m > families.M_L_ZERO)
             for m, r in a)
    out.append({"name": "rhombus A window", "ok": ok})

    ms = np.linspace(-0.99, -0.01, steps)
    b = [(m, families.rhombus(m, "B")) for m in ms]
    reps = [(m, spectral.classify(fp.to_equilibrium())) for m, fp in b if fp.special is None]
    flips = [m for (m, r), (_, r2) in zip(reps, reps[1:]) if r.n_real_pairs != r2.n_real_pairs]
    ok = all(r.classification is not spectral.Stability.LINEARLY_STABLE for _, r in reps)
    ok = ok and any(abs(m - K.m_star) < 2 * (ms[1] - ms[0]) for m in flips)
    out.append({"name": "rhombus B transition", "flips": flips, "ok": ok})

    ms = np.linspace(0.05, 5.0, max(steps // 2, 2))
    trap = [spectral.classify(families.trapezoid(m).to_equilibrium()).classification for m in ms]
    out.append({"name": "trapezoid stable",
                "ok": all(t is spectral.Stability.LINEARLY_STABLE for t in trap)})

    ring = {n: spectral.classify(families.ngon(n).to_equilibrium()).classification.value
            for n in range(3, 11)}
    expect = {n: "LinearlyStable" for n in range(3, 7)}
    expect.update({7: "Degenerate", 8: "Unstable", 9: "Unstable", 10: "Unstable"})
    out.append({"name": "n-gon table", "results": ring, "ok": ring == expect})

    idx = []
    for n in (3, 4):
        for re in solver.collinear_all([1.0] * n):
            md = spectral.morse_data(re)
            idx.append(md.nullity == 1 and md.index == n - 2)
    out.append({"name": "collinear Morse index", "ok": all(idx)})
    return out


# ----------------------------------------------------------------------------- commands


def cmd_analyze(args) -> int:
    re = _equilibrium_from_args(args)
    _emit_json(analysis(re, args.tol), args.out)
    return EXIT_OK


def cmd_family(args) -> int:
    values = _sweep_values(args)
    rows = []
    for m in map(float, values):
        try:
            fp = _family_point(args, float(m))
        except ValueError as exc:
            raise UsageError(f"parameter {m!r} outside the family domain: {exc}") from None
        rows.append(family_row(fp, args.tol))
    fh, close = _open_out(args.out)
    try:
        fh.write(sweep_csv(rows))
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_census(args) -> int:
    g = _parse_gamma(args.gamma)
    if g is None:
        raise UsageError("census needs --gamma")
    try:
        c = CirculationSet(g)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.seeds < 0:
        raise UsageError("--seeds must be non-negative")
    _emit_json(census(c, args.seeds, args.rng_seed, solver.worker_count(os.cpu_count()),
                      args.tol), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.out is None:
        raise UsageError("simulate needs --out")
    if args.positions_json:
        z, c = read_input(args.positions_json, _parse_gamma(args.gamma))
        omega = angular_velocity(z, c)
    else:
        re = _equilibrium_from_args(args)
        z, c, omega = re.config, re.circulations, re.omega
    if args.frame == "rotating" and not math.isfinite(omega):
        raise UsageError("angular velocity of the input is undefined; use --frame inertial")
    fh, close = _open_out(args.out)
    try:
        tr = dynamics.integrate(z, c, (0.0, args.horizon), args.frame,
                                omega if math.isfinite(omega) else None)
        n = c.n
        cols = ["t"] + [f"{a}_{i}" for i in range(1, n + 1) for a in ("x", "y")] + ["H", "I", "G"]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(tr.times, tr.states, tr.H_series, tr.I_series, tr.G_series):
            w.writerow([_fmt(row[0])] + [_fmt(v) for v in row[1]] + [_fmt(v) for v in row[2:]])
    finally:
        if close:
            fh.close()
    if tr.collided:
        print(f"warning: trajectory truncated at t = {tr.times[-1]:.6g} (near collision)",
              file=sys.stderr)
    return EXIT_OK


def cmd_probe(args) -> int:
    if args.delta is None or args.delta < 0:
        raise UsageError("probe needs --delta >= 0")
    if not args.horizon > 0:
        raise UsageError("--horizon must be positive")
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    re = _equilibrium_from_args(args)
    res = dynamics.probe_stability(re, args.delta, args.horizon, args.samples, args.rng_seed,
                                   workers=solver.worker_count(os.cpu_count()),
                                   escape_distance=args.escape)
    _emit_json({"equilibrium": equilibrium_dict(re),
                "samples": [{"delta": r.delta, "max_distance": r.max_distance, "T": r.T,
                             "escaped": r.escaped, "t_max": r.t_max, "exit_time": r.exit_time,
                             "message": r.message}
                            for r in res]}, args.out)
    return EXIT_OK


def cmd_repro(args) -> int:
    checks = repro(args.steps)
    for c in checks:
        print(f"{'PASS' if c['ok'] else 'FAIL'}  {c['name']}")
    if args.out:
        _emit_json(checks, args.out)
    return EXIT_OK if all(c["ok"] for c in checks) else EXIT_NUMERIC


# ----------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortexre",
                                description="Relative equilibria of point vortices and "
                                            "their stability.")
    p.add_argument("--config", help="JSON file whose keys supply defaults for the flags")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, inputs=True):
        if inputs:
            sp.add_argument("--positions-json", help="JSON file with 'gamma' and 'z' (- for stdin)")
            sp.add_argument("--family", help="closed-form family instead of a JSON input")
            sp.add_argument("--param", type=float, default=1.0, help="family parameter")
            sp.add_argument("--branch", default="A", choices=["A", "B", "a", "b"])
        sp.add_argument("--gamma", help="comma-separated circulations")
        sp.add_argument("--tol", type=float, default=spectral.DEFAULT_TOL)
        sp.add_argument("--out", help="output path (default stdout)")

    sp = sub.add_parser("analyze", help="refine and classify an equilibrium")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("family", help="sweep a closed-form family (CSV)")
    sp.add_argument("--family", required=True)
    sp.add_argument("--m-from", type=float)
    sp.add_argument("--m-to", type=float)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--branch", default="A", choices=["A", "B", "a", "b"])
    common(sp, inputs=False)
    sp.set_defaults(func=cmd_family)

    sp = sub.add_parser("census", help="find equilibrium classes for given circulations")
    sp.add_argument("--seeds", type=int, default=100)
    sp.add_argument("--rng-seed", type=int, default=0)
    common(sp, inputs=False)
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("simulate", help="integrate and write a CSV trajectory")
    common(sp)
    sp.add_argument("--frame", choices=["inertial", "rotating"], default="inertial")
    sp.add_argument("--horizon", type=float, default=10.0, help="final time")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("probe", help="perturb an equilibrium and track its orbit distance")
    common(sp)
    sp.add_argument("--delta", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--samples", type=int, default=8)
    sp.add_argument("--escape", type=float, help="stop a run once the orbit distance reaches this")
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("repro", help="rerun the reference family checks")
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--out", help="also write the check details as JSON")
    sp.set_defaults(func=cmd_repro)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    known = set(vars(args))
    unknown = sorted(k for k in cfg if k not in known or k in ("command", "func", "config"))
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    # config values become defaults of the chosen subcommand; explicit flags still win
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub.choices[args.command].set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VortexError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
