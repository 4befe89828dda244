"""Command-line front end.

Subcommands: `map` (one application of the dual billiard map), `trajectory`
(iterate the map), `orbits` (multistart 3-periodic orbit search), `verify`
(property checks on a surface), and `sharpness` (the exact-count experiment
on a perturbed sphere).

Exit codes: 0 success, 1 usage error, 2 domain error (bad surface file,
interior point), 3 convergence failure, 4 verification/experiment failure.

Output is JSON (default) or CSV, deterministic for a fixed seed; floats are
serialized with shortest round-trip precision, so re-reading a record and
re-checking its residual reproduces the computation at double precision.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .dual_map import (MapConvergenceError, NotExteriorError, dual_map,
                       inverse_consistency, symplecticity_defect)
from .orbits import (DEFAULT_RNG_SEED, OrbitSet, criticality_check,
                     min_area_threshold, multistart_search, roundtrip_defect,
                     symplectic_area)
from .sharpness import sharpness_experiment
from .surface import PerturbationParams, SurfaceError, default_eps, load_surface
from .symplectic import random_unit

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; remap to the usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return repr(float(x))


def _vec(v) -> list:
    return [float(c) for c in np.asarray(v, dtype=float)]


def _mat(v) -> list:
    return [_vec(row) for row in np.asarray(v, dtype=float)]


def _parse_point(text: str, dim: int) -> np.ndarray:
    try:
        vals = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise _UsageError(f"malformed point {text!r}: {exc}") from None
    if len(vals) != dim:
        raise _UsageError(f"point has {len(vals)} coordinates, surface needs {dim}")
    return np.array(vals)


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv_rows(header, rows, comments=()) -> str:
    lines = [",".join(header)]
    lines += [",".join(row) for row in rows]
    lines += list(comments)
    return "\n".join(lines) + "\n"


def _coord_names(prefix: str, m: int) -> list[str]:
    return [f"{prefix}_x{j + 1}" for j in range(m)] + \
        [f"{prefix}_y{j + 1}" for j in range(m)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_map(args) -> int:
    surface = load_surface(args.surface)
    z = _parse_point(args.point, surface.dim)
    res = dual_map(surface, z, args.direction, tol=args.tol)
    q = surface.point(res.tangency_normal)
    if args.format == "json":
        record = {
            "command": "map",
            "surface": {"kind": surface.kind, "m": surface.m},
            "direction": args.direction,
            "point": _vec(z),
            "image": _vec(res.image),
            "tangency_normal": _vec(res.tangency_normal),
            "tangency_point": _vec(q),
            "multiplier": float(res.multiplier),
            "residual": float(res.residual),
            "iterations": int(res.iterations),
        }
        _emit(_json_dump(record), args.out)
    else:
        header = ["step"] + _coord_names("z", surface.m)
        rows = [["0"] + [_fmt(c) for c in z],
                ["1"] + [_fmt(c) for c in res.image]]
        comments = [f"# multiplier={_fmt(res.multiplier)} residual={_fmt(res.residual)}"]
        _emit(_csv_rows(header, rows, comments), args.out)
    return EXIT_OK


def cmd_trajectory(args) -> int:
    surface = load_surface(args.surface)
    z = _parse_point(args.point, surface.dim)
    if args.steps < 0:
        raise _UsageError("--steps must be >= 0")
    points = [z]
    for k in range(args.steps):
        try:
            res = dual_map(surface, points[-1], args.direction, tol=args.tol)
        except NotExteriorError as exc:
            print(f"error: step {k + 1}: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        except MapConvergenceError as exc:
            print(f"error: step {k + 1}: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
        points.append(res.image)
    if args.format == "json":
        record = {
            "command": "trajectory",
            "surface": {"kind": surface.kind, "m": surface.m},
            "direction": args.direction,
            "steps": int(args.steps),
            "points": _mat(points),
        }
        _emit(_json_dump(record), args.out)
    else:
        header = ["step"] + _coord_names("z", surface.m)
        rows = [[str(k)] + [_fmt(c) for c in p] for k, p in enumerate(points)]
        _emit(_csv_rows(header, rows), args.out)
    return EXIT_OK


def _orbit_record(index: int, orb) -> dict:
    return {
        "index": index,
        "vertices": _mat(orb.vertices),
        "tangency_normals": _mat(orb.tuple.normals),
        "multipliers": _vec(orb.tuple.multipliers),
        "area_value": float(orb.area_value),
        "residual": float(orb.residual),
        "is_isolated": bool(orb.is_isolated),
        "min_singular_value": float(orb.min_singular_value),
    }


def _orbit_csv(surface, oset: OrbitSet) -> str:
    m = surface.m
    n = 3
    header = ["index"]
    for i in range(n):
        header += _coord_names(f"z{i + 1}", m)
    header += [f"a{i + 1}" for i in range(n)]
    header += ["area_value", "residual", "is_isolated"]
    rows = []
    for k, orb in enumerate(oset.orbits):
        row = [str(k)]
        row += [_fmt(c) for c in orb.vertices.ravel()]
        row += [_fmt(c) for c in orb.tuple.multipliers]
        row += [_fmt(orb.area_value), _fmt(orb.residual),
                "true" if orb.is_isolated else "false"]
        rows.append(row)
    meta = " ".join(f"{k}={v}" for k, v in sorted(oset.metadata.items()))
    comments = [f"# count={oset.count} families={len(oset.families)} {meta}"]
    return _csv_rows(header, rows, comments)


def cmd_orbits(args) -> int:
    surface = load_surface(args.surface)
    oset = multistart_search(surface, n_starts=args.starts, rng_seed=args.seed,
                             tol=args.tol)
    if args.format == "json":
        record = {
            "command": "orbits",
            "surface": {"kind": surface.kind, "m": surface.m},
            "starts": int(args.starts),
            "seed": int(args.seed),
            "count": oset.count,
            "orbits": [_orbit_record(k, orb) for k, orb in enumerate(oset.orbits)],
            "families": [
                {
                    "representative": _orbit_record(k, fam.representative),
                    "members_found": int(fam.members_found),
                }
                for k, fam in enumerate(oset.families)
            ],
            "metadata": {k: int(v) for k, v in sorted(oset.metadata.items())},
        }
        _emit(_json_dump(record), args.out)
    else:
        _emit(_orbit_csv(surface, oset), args.out)
    return EXIT_OK


def _verify_checks(surface, args) -> list[dict]:
    rng = np.random.default_rng(args.seed)
    tol = args.tol
    checks = []

    def add(name, value, threshold):
        checks.append({
            "name": name,
            "value": float(value),
            "threshold": float(threshold),
            "passed": bool(value < threshold),
        })

    try:
        surface.certify_convexity()
        checks.append({"name": "convexity_certificate", "value": 0.0,
                       "threshold": 1.0, "passed": True})
    except SurfaceError:
        checks.append({"name": "convexity_certificate", "value": 1.0,
                       "threshold": 1.0, "passed": False})

    sample = []
    for _ in range(args.samples):
        u = random_unit(rng, surface.dim)
        c = 1.5 + rng.uniform(0.0, 1.0)
        sample.append(c * surface.support(u) * u)

    worst_sympl = 0.0
    worst_inv = 0.0
    for z in sample:
        worst_sympl = max(worst_sympl, symplecticity_defect(surface, z))
        worst_inv = max(worst_inv, inverse_consistency(surface, z))
    add("symplecticity_defect", worst_sympl, tol if tol else 1e-5)
    add("inverse_consistency", worst_inv, tol if tol else 1e-8)

    oset = multistart_search(surface, n_starts=args.starts, rng_seed=args.seed)
    found = list(oset.orbits) + [fam.representative for fam in oset.families]
    worst_crit = 0.0
    worst_round = 0.0
    min_area = np.inf
    for orb in found:
        worst_crit = max(worst_crit, criticality_check(surface, orb))
        worst_round = max(worst_round, roundtrip_defect(surface, orb))
        min_area = min(min_area, abs(orb.area_value))
    add("orbit_criticality", worst_crit, tol if tol else 1e-8)
    add("orbit_roundtrip", worst_round, tol if tol else 1e-8)
    threshold = min_area_threshold(surface)
    checks.append({
        "name": "orbit_area_above_threshold",
        "value": float(min_area if found else np.inf),
        "threshold": float(threshold),
        "passed": bool(not found or min_area > threshold),
    })

    worst_sym = 0.0
    for _ in range(1000):
        q = rng.normal(size=(3, surface.dim))
        t = rng.normal(size=surface.dim)
        f = symplectic_area(q)
        worst_sym = max(
            worst_sym,
            abs(symplectic_area(q[[1, 2, 0]]) - f),
            abs(symplectic_area(q[[1, 0, 2]]) + f),
            abs(symplectic_area(q + t) - f),
        )
    add("area_symmetries", worst_sym, tol if tol else 1e-10)
    return checks


def cmd_verify(args) -> int:
    surface = load_surface(args.surface)
    checks = _verify_checks(surface, args)
    passed = all(c["passed"] for c in checks)
    if args.format == "json":
        record = {
            "command": "verify",
            "surface": {"kind": surface.kind, "m": surface.m},
            "checks": checks,
            "passed": passed,
        }
        _emit(_json_dump(record), args.out)
    else:
        header = ["check", "passed", "value", "threshold"]
        rows = [[c["name"], "true" if c["passed"] else "false",
                 _fmt(c["value"]), _fmt(c["threshold"])] for c in checks]
        comments = [f"# passed={'true' if passed else 'false'}"]
        _emit(_csv_rows(header, rows, comments), args.out)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_sharpness(args) -> int:
    if args.surface:
        surface = load_surface(args.surface)
        params = surface.params.get("perturbation")
        if params is None:
            raise SurfaceError(
                "sharpness requires a perturbed_sphere surface")
    else:
        if not args.coefficients:
            raise _UsageError("provide --surface or --coefficients")
        try:
            a = tuple(float(tok) for tok in args.coefficients.split(","))
        except ValueError as exc:
            raise _UsageError(f"malformed coefficient list: {exc}") from None
        eps = args.eps if args.eps is not None else default_eps(a)
        params = PerturbationParams(a, eps)
    report = sharpness_experiment(params, n_starts=args.starts,
                                  rng_seed=args.seed,
                                  check_doubling=not args.skip_doubling)
    record = {
        "command": "sharpness",
        "a": _vec(params.a),
        "eps": float(params.eps),
        "expected_count": report.expected_count,
        "found_count": report.found_count,
        "found_count_doubled": report.found_count_doubled,
        "stable_under_doubling": report.stable_under_doubling,
        "bijection_ok": report.bijection_ok,
        "success": report.success,
        "critical_classes": [
            {
                "representative": _vec(c.point),
                "pair_index": int(c.pair_index),
                "branch": int(c.branch),
                "eta": float(c.eta),
                "critical_value": float(c.critical_value),
            }
            for c in report.critical_classes
        ],
        "seed_to_orbit": [int(k) for k in report.seed_to_orbit],
        "orbits": [_orbit_record(k, orb)
                   for k, orb in enumerate(report.search.orbits)],
        "metadata": {k: int(v) for k, v in sorted(report.search.metadata.items())},
    }
    if args.format == "json":
        _emit(_json_dump(record), args.out)
    else:
        header = ["field", "value"]
        rows = [[k, json.dumps(record[k])] for k in
                ("expected_count", "found_count", "found_count_doubled",
                 "stable_under_doubling", "bijection_ok", "success")]
        _emit(_csv_rows(header, rows), args.out)
    return EXIT_OK if report.success else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualbilliard",
                     description="Dual billiard maps and 3-periodic orbit search "
                                 "for convex hypersurfaces in R^(2m).")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def common(p, surface_required=True):
        p.add_argument("--surface", required=surface_required,
                       help="path to a surface spec file")
        p.add_argument("--seed", type=int, default=DEFAULT_RNG_SEED,
                       help="random seed (default %(default)s)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("map", help="apply the dual billiard map once")
    common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--direction", choices=("forward", "backward"),
                   default="forward")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("trajectory", help="iterate the dual billiard map")
    common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--direction", choices=("forward", "backward"),
                   default="forward")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("orbits", help="multistart search for 3-periodic orbits")
    common(p)
    p.add_argument("--starts", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_orbits)

    p = sub.add_parser("verify", help="run property checks on a surface")
    common(p)
    p.add_argument("--starts", type=int, default=100,
                   help="multistart budget for the orbit checks")
    p.add_argument("--samples", type=int, default=20,
                   help="number of exterior sample points")
    p.add_argument("--tol", type=float, default=None,
                   help="override every check threshold")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sharpness",
                       help="orbit-count experiment on a perturbed sphere")
    common(p, surface_required=False)
    p.add_argument("--coefficients", default=None,
                   help="comma-separated quadratic coefficients (alternative "
                            "to --surface)")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--starts", type=int, default=500)
    p.add_argument("--skip-doubling", action="store_true",
                   help="skip the doubled-start stability run")
    p.set_defaults(func=cmd_sharpness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SurfaceError, NotExteriorError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except MapConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
