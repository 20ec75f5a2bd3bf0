"""Command-line front end: reproducible runs driven by flags or a JSON config.

Every run writes an assumption audit first, refuses solver stages whose
prerequisites fail (unless --force), and emits deterministic artifacts with
floats at 17 significant digits.

Exit codes: 0 ok, 2 config violation, 3 assumption failure, 4 solver
failure, 5 I/O failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import continuation, dispersion, elliptic, laminar, profiles
from .errors import (AssumptionError, BifurcationError, BracketError,
                     ConvergenceError, ProfileError, StratWaveError,
                     WindowEscapeError)

EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_SOLVER = 4
EXIT_IO = 5


class ConfigError(Exception):
    pass


def _format_json(obj):
    """Serialise with every float at 17 significant digits (lossless)."""
    if isinstance(obj, float):
        if not np.isfinite(obj):
            return '"%s"' % repr(obj)
        return format(obj, ".17g")
    if isinstance(obj, (np.floating,)):
        return _format_json(float(obj))
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_format_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_format_json(v)}"
                          for k, v in obj.items())
        return "{" + items + "}"
    raise TypeError(f"cannot serialise {type(obj)}")


def _write_json(obj, path):
    with open(path, "w") as fh:
        fh.write(_format_json(obj))
        fh.write("\n")


def worker_count():
    """Worker cap from STRATWAVE_THREADS (default: cpu count)."""
    env = os.environ.get("STRATWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"STRATWAVE_THREADS must be an integer: {env!r}") from exc
    return os.cpu_count() or 1


def build_parser():
    p = argparse.ArgumentParser(prog="stratwave", description=__doc__)
    sub = p.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--profile", help="profile JSON file")
    common.add_argument("--output-dir", default=".")
    common.add_argument("--force", action="store_true",
                        help="run even if prerequisite assumptions fail")
    common.add_argument("--n-nodes", type=int, default=64)
    common.add_argument("--nx", type=int, default=64)
    common.add_argument("--ny", type=int, default=48)
    common.add_argument("--tol", type=float, default=1e-8)

    sp = sub.add_parser("laminar", parents=[common])
    sp.add_argument("--lambda", dest="lam", type=float)

    sub.add_parser("thresholds", parents=[common])

    sp = sub.add_parser("symbols", parents=[common])
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--m-max", type=int, default=5)
    sp.add_argument("--csv", action="store_true", help="also write symbols.csv")

    sp = sub.add_parser("bifurcate-sigma", parents=[common])
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--k", type=int, default=1)

    sp = sub.add_parser("bifurcate-lambda", parents=[common])
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--search-floor", type=float)

    sp = sub.add_parser("branch", parents=[common])
    sp.add_argument("--mode", choices=["sigma", "lambda"])
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--s-max", type=float, default=0.05)
    sp.add_argument("--steps", type=int, default=25)
    sp.add_argument("--branch-tol", type=float, default=1e-9)
    sp.add_argument("--search-floor", type=float)
    sp.add_argument("--no-snapshots", action="store_true")

    sp = sub.add_parser("validate", parents=[common])
    sp.add_argument("--branch-file", help="branch.json from a previous run")
    sp.add_argument("--point", type=int, default=-1)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    return p


def _merge_config(args):
    """Config-file values fill in any argument still at its parser default."""
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object with flat keys")
    parser = build_parser()
    defaults = {}
    for sub_action in parser._subparsers._group_actions:
        if args.command in sub_action.choices:
            sp = sub_action.choices[args.command]
            defaults = {a.dest: a.default for a in sp._actions}
    alias = {"lambda": "lam"}
    for key, value in cfg.items():
        dest = alias.get(key, key.replace("-", "_"))
        if dest not in defaults:
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, dest, None) == defaults.get(dest):
            setattr(args, dest, value)
    return args


def _require_arg(args, name, flag):
    if getattr(args, name, None) is None:
        raise ConfigError(f"{args.command} requires {flag}")


_PREREQ = {
    "laminar": ("A1", "A3"),
    "thresholds": ("A1", "A3"),
    "symbols": ("A1", "A3"),
    "bifurcate-sigma": ("A1", "A3", "A4"),
    "bifurcate-lambda": ("A1", "A3", "A4", "B1", "B2", "B3"),
    "branch": ("A1", "A3", "A4"),
    "validate": ("A1", "A3"),
}


def _prepare(args):
    """Load the profile, write the audit, and gate on prerequisites."""
    _require_arg(args, "profile", "--profile")
    os.makedirs(args.output_dir, exist_ok=True)
    profile = profiles.load_profile(args.profile)
    report = profiles.check_assumptions(profile)
    audit = {
        "profile": profiles.profile_to_dict(profile),
        "checks": report.to_dict(),
        "prerequisites": list(_PREREQ[args.command]),
        "prerequisites_pass": report.passed(*_PREREQ[args.command]),
        "forced": bool(args.force),
    }
    _write_json(audit, os.path.join(args.output_dir, "audit.json"))
    violated = not report.passed(*_PREREQ[args.command])
    if args.command == "bifurcate-lambda" or (
            args.command == "branch" and getattr(args, "mode", None) == "lambda"):
        violated = violated or not report.passed("B1", "B2", "B3")
    if violated and not args.force:
        bad = ", ".join(c.name for c in report.failures())
        raise AssumptionError(f"prerequisite assumptions fail ({bad}); "
                              "use --force to run anyway", report)
    return profile, report, violated


def _out(args, name):
    return os.path.join(args.output_dir, name)


def cmd_laminar(args):
    profile, _, violated = _prepare(args)
    _require_arg(args, "lam", "--lambda")
    flow = laminar.solve_laminar(profile, args.lam, n_nodes=args.n_nodes,
                                 tol=args.tol, check=False)
    laminar.laminar_to_csv(flow, _out(args, "laminar.csv"))
    if violated:
        _write_json({"prerequisites_violated": True},
                    _out(args, "laminar.flags.json"))
    return 0


def cmd_thresholds(args):
    profile, _, violated = _prepare(args)
    Lam = laminar._auto_threshold(profile, n_nodes=args.n_nodes)
    lam_minus = laminar.find_lambda_minus(profile, n_nodes=args.n_nodes,
                                          lambda_threshold=Lam)
    doc = {"lambda_threshold": Lam, "lambda_minus": lam_minus}
    if violated:
        doc["prerequisites_violated"] = True
    _write_json(doc, _out(args, "thresholds.json"))
    return 0


def cmd_symbols(args):
    profile, _, violated = _prepare(args)
    _require_arg(args, "lam", "--lambda")
    _require_arg(args, "sigma", "--sigma")
    flow = laminar.solve_laminar(profile, args.lam, n_nodes=args.n_nodes,
                                 check=False)
    records = []
    for m in range(1, args.m_max + 1):
        rec = dispersion.solve_mode_bvp(profile, flow, m, args.k)
        dispersion.symbol_mu(profile, flow, m, args.k, args.sigma, mode=rec)
        try:
            dispersion.sigma_star(profile, flow, m, args.k, mode=rec)
        except BifurcationError:
            rec.sigma_star = None
        records.append(rec)
    doc = {
        "lambda": args.lam,
        "sigma": args.sigma,
        "k": args.k,
        "modes": [r.to_dict() for r in records],
    }
    if violated:
        doc["prerequisites_violated"] = True
    _write_json(doc, _out(args, "symbols.json"))
    if args.csv:
        dispersion.modes_to_csv(records, _out(args, "symbols.csv"))
    return 0


def cmd_bifurcate_sigma(args):
    profile, _, violated = _prepare(args)
    _require_arg(args, "lam", "--lambda")
    flow = laminar.solve_laminar(profile, args.lam, n_nodes=args.n_nodes,
                                 check=False)
    rec = dispersion.solve_mode_bvp(profile, flow, args.m, args.k)
    value = dispersion.sigma_star(profile, flow, args.m, args.k, mode=rec)
    doc = {"mode": args.m, "k": args.k, "lambda": args.lam,
           "sigma_star": value, "dw0": rec.dw0}
    if violated:
        doc["prerequisites_violated"] = True
    _write_json(doc, _out(args, "bifurcation.json"))
    return 0


def cmd_bifurcate_lambda(args):
    profile, _, violated = _prepare(args)
    _require_arg(args, "sigma", "--sigma")
    lam_minus = laminar.find_lambda_minus(profile, n_nodes=args.n_nodes)
    floor = args.search_floor
    if floor is None:
        floor = dispersion.default_search_floor(profile, args.sigma, args.m,
                                                args.k, lam_minus)
    star = dispersion.lambda_star(profile, args.sigma, args.m, args.k, floor,
                                  n_nodes=args.n_nodes, check=False)
    doc = {"mode": args.m, "k": args.k, "sigma": args.sigma,
           "lambda_star": star.value, "slope": star.slope,
           "multiple_roots": star.multiple_roots,
           "lambda_threshold": star.lambda_threshold,
           "search_floor": star.search_floor, "lambda_minus": lam_minus}
    if violated:
        doc["prerequisites_violated"] = True
    _write_json(doc, _out(args, "bifurcation.json"))
    return 0


def cmd_branch(args):
    profile, _, violated = _prepare(args)
    if args.mode not in ("sigma", "lambda"):
        raise ConfigError("branch requires --mode sigma|lambda")
    if args.mode == "sigma":
        _require_arg(args, "lam", "--lambda")
        curve = continuation.branch_from_sigma(
            profile, args.lam, args.m, args.k, s_max=args.s_max,
            n_steps=args.steps, tol=args.branch_tol, nx=args.nx, ny=args.ny,
            check=not args.force)
    else:
        _require_arg(args, "sigma", "--sigma")
        curve = continuation.branch_from_lambda(
            profile, args.sigma, args.m, args.k, s_max=args.s_max,
            n_steps=args.steps, tol=args.branch_tol, nx=args.nx, ny=args.ny,
            search_floor=args.search_floor, check=not args.force)
    continuation.branch_to_json(curve, _out(args, "branch.json"))
    if not args.no_snapshots:
        for point in curve.points:
            elliptic.field_to_csv(point.shape, point.field,
                                  _out(args, f"field_{point.s:.6g}.csv"))
    if violated:
        _write_json({"prerequisites_violated": True},
                    _out(args, "branch.flags.json"))
    return 0


def cmd_validate(args):
    profile, _, violated = _prepare(args)
    _require_arg(args, "branch_file", "--branch-file")
    try:
        with open(args.branch_file) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read branch file: {exc}") from exc
    pts = doc.get("points", [])
    if not pts:
        raise ConfigError("branch file has no points")
    pt = pts[args.point]
    shape = elliptic.SurfaceShape(doc["k"], np.asarray(pt["eta_coeffs"]))
    if doc["bifurcation_parameter"] == "sigma":
        sigma, lam = pt["parameter"], args.lam
        _require_arg(args, "lam", "--lambda")
    else:
        sigma, lam = args.sigma, pt["parameter"]
        _require_arg(args, "sigma", "--sigma")
    grid = elliptic.get_grid(shape.k, args.nx, args.ny)
    field = elliptic.solve_semilinear(profile, lam, shape, grid, tol=args.tol,
                                      check=False)
    report = continuation.validate_solution(profile, sigma, lam, shape, field)
    out = report.to_dict()
    out.update({"s": pt["s"], "parameter": pt["parameter"]})
    if violated:
        out["prerequisites_violated"] = True
    _write_json(out, _out(args, "validation.json"))
    return 0


_COMMANDS = {
    "laminar": cmd_laminar,
    "thresholds": cmd_thresholds,
    "symbols": cmd_symbols,
    "bifurcate-sigma": cmd_bifurcate_sigma,
    "bifurcate-lambda": cmd_bifurcate_lambda,
    "branch": cmd_branch,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    try:
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except (ConfigError, ProfileError, ValueError) as exc:
        print(f"stratwave: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"stratwave: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConvergenceError, WindowEscapeError, BracketError,
            BifurcationError, StratWaveError) as exc:
        print(f"stratwave: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"stratwave: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
