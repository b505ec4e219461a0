"""Command line front end: ``pfdyn <verb> [options]``.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, equilibria, hermite, lorenzlab, saddle, ulam
from .difiter import Box, DifferentialIteration, OrbitOverflow, compact_invariance_probe, orbit
from .polymap import DimensionError, search_partial_linear
from .series import SeriesCapExceeded
from .systems import BUILTIN_PARAMS, SystemError_, builtin, load_system

log = logging.getLogger("pfdyn")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
VERBS = ("analyze", "simulate", "saddle", "hermite", "ulam", "lorenz", "doorstep")


class InputError(ValueError):
    pass


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"expected comma-separated integers, got {text!r}") from exc


def _num(x) -> str:
    """Shortest round-trip decimal."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(path, doc) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("PFDYN_THREADS")
    return max(1, int(env)) if env else 1


def _resolve_system(args):
    """Builtin name or JSON path, with --param/--alpha/--sigma... overrides."""
    if not args.system:
        raise InputError("--system is required")
    overrides = {}
    for kv in args.param or []:
        if "=" not in kv:
            raise InputError(f"--param expects name=value, got {kv!r}")
        k, v = kv.split("=", 1)
        try:
            overrides[k] = float(v)
        except ValueError as exc:
            raise InputError(f"bad value in --param {kv!r}") from exc
    for name in ("alpha", "sigma", "rho", "beta"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if args.system in BUILTIN_PARAMS:
        valid = set(BUILTIN_PARAMS[args.system])
        return builtin(args.system, **{k: v for k, v in overrides.items() if k in valid})
    if not Path(args.system).is_file():
        raise InputError(f"--system {args.system!r} is neither a builtin "
                         f"({', '.join(BUILTIN_PARAMS)}) nor a file")
    return load_system(args.system, overrides)


def _iteration(spec, args) -> DifferentialIteration:
    delta = np.atleast_1d(_floats(args.delta) if isinstance(args.delta, str) else args.delta)
    tau = _floats(args.tau) if getattr(args, "tau", None) else None
    if tau is not None and tau.size != delta.size:
        delta = np.full(tau.size, delta[0])
    return DifferentialIteration(spec.field, delta, spec.blocks, tau,
                                 delta_max=max(1.0, float(delta.max())))


def _config(args, spec=None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    cfg["version"] = __version__
    if spec is not None:
        cfg["system_name"] = spec.name
        cfg["system_params"] = spec.params
    return cfg


def _report(verb: str, args, result, spec=None) -> dict:
    return {"verb": verb, "config": _config(args, spec), "result": result}


# -- verbs ---------------------------------------------------------------------

def cmd_analyze(args) -> int:
    spec = _resolve_system(args)
    it = _iteration(spec, args)
    d = spec.field.dim_in
    box = Box.parse(args.box) if args.box else Box(np.full(d, -2.0), np.full(d, 2.0))
    search = equilibria.find_zeros_report(spec.field, box, args.grid, float(it.delta[0]))
    eqs = []
    for e in search.equilibria:
        fault = equilibria.lemma1_analysis(e, it.tau, spec.field, it.blocks)
        eqs.append({
            "location": e.location, "residual": e.residual,
            "eigenvalues": e.eigenvalues, "multipliers": 1 + it.delta_vector[0] * e.eigenvalues,
            "classification": equilibria.classify(e, float(it.delta[0])),
            "possibly_non_isolated": e.possibly_non_isolated,
            "char_poly": equilibria.characteristic_polynomial(spec.field, e),
            "fault_analysis": {"lambda_tau": fault.lambda_tau, "aggregate": fault.aggregate,
                       "on_fault": fault.on_fault, "verdict": fault.verdict,
                       "fault_directions": fault.fault_directions},
        })
    splits = []
    if d <= 12 and d > 1:
        for dec in search_partial_linear(spec.field):
            splits.append({"a_block": list(dec.a_block), "b_block": list(dec.b_block),
                           "diagonal_linear_part": dec.diagonal})
    result = {"equilibria": eqs,
              "search": {"starts": search.starts, "abandoned_singular": search.abandoned_singular,
                         "not_converged": search.not_converged,
                         "diagnostics": search.diagnostics},
              "partial_linear_splits": splits}
    if args.probe:
        pr = compact_invariance_probe(it, box, args.probe, args.horizon, args.seed)
        result["compact_probe"] = {"fraction_escaped": pr.fraction_escaped,
                                   "max_excursion": pr.max_excursion,
                                   "samples": pr.samples, "horizon": pr.horizon}
    write_json(args.out, _report("analyze", args, result, spec))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _resolve_system(args)
    it = _iteration(spec, args)
    start = _floats(args.start)
    orb = orbit(it, start, args.steps, args.burn_in)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        names = spec.field.names or [f"x{j}" for j in range(it.dim)]
        w.writerow(["step"] + [f"a_{j + 1}" for j in range(it.dim)])
        for k, pt in enumerate(orb.points):
            w.writerow([orb.offset + k] + [_num(v) for v in pt])
    if args.report:
        write_json(args.report, _report("simulate", args, {
            "rows": len(orb), "first_step": orb.offset, "vars": list(names),
            "final": orb.points[-1] if len(orb) else None}, spec))
    return EXIT_OK


def cmd_saddle(args) -> int:
    spec = _resolve_system(args)
    it = _iteration(spec, args)
    y = _floats(args.y)
    n = _ints(args.n)
    pr = saddle.PlancherelRotach.from_iteration(it, y, n)
    search = saddle.critical_points_report(pr, args.starts, args.seed)
    hess = saddle.hessian_yF(spec.field, y, np.zeros(it.dim))
    result = {
        "critical_points": [
            {"location": c.location, "gradient_residual": c.gradient_residual,
             "hessian_eigenvalues": c.hessian_eigenvalues, "degenerate": c.degenerate}
            for c in search.points],
        "diagnostics": search.diagnostics,
        "hessian_yF_at_origin": {"matrix": hess.matrix, "eigenvalues": hess.eigenvalues,
                                 "degenerate": hess.degenerate,
                                 "symbolic_rank": hess.symbolic_rank},
    }
    try:
        gap = saddle.resolvent_gap(pr)
        result["resolvent_gap"] = {"gap": gap.gap, "pure": gap.pure, "series": gap.series}
    except SeriesCapExceeded as exc:
        result["resolvent_gap"] = {"skipped": str(exc)}
    decs = search_partial_linear(spec.field) if 1 < it.dim <= 12 else []
    result["asymptotic_iterations"] = [
        {"a_block": list(dec.a_block), "G": repr(saddle.asymptotic_iteration(dec, 1.0))}
        for dec in decs]
    write_json(args.out, _report("saddle", args, result, spec))
    return EXIT_OK


def cmd_hermite(args) -> int:
    zs = hermite.hermite_zeros(args.n, args.scaling)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "zero", "scaled"])
        for i, (z, s) in enumerate(zip(zs.zeros, zs.scaled())):
            w.writerow([i, _num(z), _num(s)])
    if args.laws:
        result = {"n": zs.n, "scaling": zs.scaling}
        if zs.n >= 10:
            lc = hermite.law_comparison(zs)
            result.update(ks_arcsine=lc.ks_arcsine, ks_semicircle=lc.ks_semicircle,
                          better=lc.better)
        else:
            result["note"] = "law comparison needs n >= 10"
        write_json(args.laws, _report("hermite", args, result))
    return EXIT_OK


def _partition(spec, args) -> ulam.GridPartition:
    d = spec.field.dim_in
    if not args.box:
        raise InputError("--box is required")
    box = Box.parse(args.box)
    if box.dim != d:
        raise InputError(f"--box has {box.dim} axes, system has {d}")
    cells = _ints(args.cells)
    if len(cells) == 1:
        cells = cells * d
    return ulam.GridPartition(box, cells)


def cmd_ulam(args) -> int:
    spec = _resolve_system(args)
    it = _iteration(spec, args)
    part = _partition(spec, args)
    tm = ulam.build_transition(it, part, args.samples, args.seed, args.absorbing,
                               threads=_threads(args))
    dens = ulam.invariant_density(tm, args.tol, args.max_iters)
    dens.weights.astype("<f8").tofile(args.out)
    if args.marginals:
        with open(args.marginals, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis", "cell", "lower", "upper", "weight"])
            for ax, m in enumerate(ulam.marginals(dens.weights, part)):
                edges = part.edges(ax)
                for k, v in enumerate(m):
                    w.writerow([ax, k, _num(edges[k]), _num(edges[k + 1]), _num(v)])
    result = {"cells": part.total_cells, "residual": dens.residual,
              "iterations": dens.iterations, "flagged_rows": int(tm.flagged_rows.size),
              "escaped_mass_mean": float(tm.escaped_mass_per_row.mean()),
              "weights_sha256": _sha(dens.weights)}
    if args.report:
        write_json(args.report, _report("ulam", args, result, spec))
    return EXIT_OK


def _sha(arr: np.ndarray) -> str:
    import hashlib
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


def cmd_doorstep(args) -> int:
    spec = _resolve_system(args)
    it = _iteration(spec, args)
    part = _partition(spec, args)
    rep = ulam.doorstep(it, _floats(args.start), part, args.horizon)
    write_json(args.out, _report("doorstep", args, {
        "t_delta": rep.t_delta, "max_first_visit": rep.max_first_visit,
        "unvisited_fraction": rep.unvisited_fraction,
        "first_visit_steps": rep.first_visit_steps}, spec))
    return EXIT_OK


def cmd_lorenz(args) -> int:
    p = lorenzlab.LorenzParams(args.sigma, args.rho, args.beta)
    sv = _floats(args.s_vector) if args.s_vector else lorenzlab.DEFAULT_S_VECTOR
    result = lorenzlab.lorenz_study(p, args.delta, args.steps, _floats(args.start), sv,
                                    args.hermite_n, args.seed,
                                    occupancy_steps=args.occupancy_steps)
    if args.sweep:
        result["sweep"] = []
        for d in lorenzlab.sweep_directions(args.sweep):
            fr = lorenzlab.wing_frame(p, d)
            result["sweep"].append({"s_vector": d, "mu": fr.mu, "omega_bar": fr.omega_bar,
                                    "omega_bar_plus": fr.omega_bar_plus,
                                    "omega_bar_minus": fr.omega_bar_minus})
    write_json(args.report, _report("lorenz", args, result))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["center", "index", "chi", "radius"])
            for fam in result["ovals"]:
                for i, (chi, r) in enumerate(zip(fam["chi"], fam["radii"])):
                    w.writerow([fam["center"], i, _num(chi), "" if r is None else _num(r)])
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (falls back to PFDYN_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    system = argparse.ArgumentParser(add_help=False)
    system.add_argument("--system", help="builtin name (lorenz, logistic, harmonic) or JSON file")
    system.add_argument("--param", action="append", metavar="NAME=VALUE")
    system.add_argument("--alpha", type=float, help="logistic rate")
    system.add_argument("--sigma", type=float)
    system.add_argument("--rho", type=float)
    system.add_argument("--beta", type=float)
    system.add_argument("--delta", default="0.005", help="step, or comma list per block")
    system.add_argument("--tau", default=None, help="direction weights per block")

    parser = argparse.ArgumentParser(prog="pfdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("analyze", parents=[common, system], help="zeros, spectra, faults")
    p.add_argument("--box", help='"lo,hi;lo,hi;..." (default [-2,2]^d)')
    p.add_argument("--grid", type=int, default=8, help="Newton starts per axis")
    p.add_argument("--probe", type=int, default=0, help="compact-invariance samples")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common, system], help="orbit to CSV")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--out", default="orbit.csv")
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("saddle", parents=[common, system], help="critical points, gap")
    p.add_argument("--y", required=True)
    p.add_argument("--n", required=True)
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--out", default="saddle.json")
    p.set_defaults(func=cmd_saddle)

    p = sub.add_parser("hermite", parents=[common], help="Hermite zeros and zero laws")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--scaling", choices=[hermite.BY_LARGEST_ZERO, hermite.BY_SQRT_2N],
                   default=hermite.BY_LARGEST_ZERO)
    p.add_argument("--out", default="zeros.csv")
    p.add_argument("--laws")
    p.set_defaults(func=cmd_hermite)

    p = sub.add_parser("ulam", parents=[common, system], help="Ulam invariant density")
    p.add_argument("--box")
    p.add_argument("--cells", default="64")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--absorbing", action="store_true",
                   help="escaped rows self-loop instead of uniform fallback")
    p.add_argument("--out", default="density.bin")
    p.add_argument("--marginals", help="CSV of per-axis marginal weights")
    p.add_argument("--report")
    p.set_defaults(func=cmd_ulam)

    p = sub.add_parser("doorstep", parents=[common, system], help="first-visit times")
    p.add_argument("--box")
    p.add_argument("--cells", default="10")
    p.add_argument("--start", required=True)
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--out", default="doorstep.json")
    p.set_defaults(func=cmd_doorstep)

    p = sub.add_parser("lorenz", parents=[common], help="full Lorenz case study")
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--rho", type=float, default=28.0)
    p.add_argument("--beta", type=float, default=8.0 / 3.0)
    p.add_argument("--delta", type=float, default=0.005)
    p.add_argument("--steps", type=int, default=2_000_000)
    p.add_argument("--start", default="1,1,1")
    p.add_argument("--s-vector", help="covector r,s,t (default (0,1,1)/sqrt2)")
    p.add_argument("--hermite-n", type=int, default=50)
    p.add_argument("--occupancy-steps", type=int, default=None)
    p.add_argument("--sweep", type=int, default=0, help="also tabulate N sweep directions")
    p.add_argument("--report", default="lorenz_report.json")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_lorenz)
    return parser


VECTOR_FLAGS = ("--box", "--start", "--y", "--s-vector", "--delta", "--tau")


def _glue_negative(argv):
    """--box "-30,30;..." would read as an option; glue it to its flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in VECTOR_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _glue_negative(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, SystemError_, DimensionError, ValueError, OSError) as exc:
        print(f"pfdyn {args.verb}: input error: {exc}", file=sys.stderr)
        if isinstance(exc, InputError):
            print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_INPUT
    except (OrbitOverflow, ulam.NotConverged, SeriesCapExceeded, FloatingPointError,
            np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"pfdyn {args.verb}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
