"""Command-line driver tying the solvers and checks into reproducible runs.

Every subcommand materializes its full configuration into a manifest before
computing, so a run can be reproduced from the manifest alone; the manifest
is rewritten at the end with the wall-clock duration and a verification
summary. Data outputs are CSV, structured reports are JSON with sorted keys,
and exit codes follow the contract: 0 success, 2 solver failure,
3 verification failure, 64 usage, 65 data format.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .checks import (
    load_ground_state,
    make_ground_state,
    config_digest,
    decay_fit,
    uniqueness_probe,
    verification_document,
)
from .descent import (
    FlowConfig,
    minimize_weinstein,
    perturbed_restarts,
)
from .energy import normalize_to_EL, weinstein
from .errors import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    EXIT_VERIFY,
    DataFormatError,
    NonConvergence,
    SolverFailure,
    VerificationFailure,
)
from .radial import DEFAULT_N, DEFAULT_R_MAX, DEFAULT_STRETCH, make_grid
from .rearrange import equimeasurability_gap, rearrangement_report, schwarz_rearrange
from .rng import Xorshift64Star
from .shapes import random_bumps
from .shooting import ShootingConfig, find_separatrix

_GN_COUNT = 200
_GN_SEED = 42
_REARRANGE_COUNT = 50


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(sp):
    sp.add_argument("--r-max", type=float, default=DEFAULT_R_MAX, dest="r_max")
    sp.add_argument("--n", type=int, default=DEFAULT_N)
    sp.add_argument("--stretch", type=float, default=DEFAULT_STRETCH)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=str, default=".")
    sp.add_argument("--tol-bisect", type=float, default=1e-13, dest="tol_bisect")
    sp.add_argument("--tol-ode", type=float, default=1e-10, dest="tol_ode")
    sp.add_argument("--tol-grad", type=float, default=3e-4, dest="tol_grad")
    sp.add_argument(
        "--tol-pohozaev", type=float, default=1e-3, dest="tol_pohozaev"
    )
    sp.add_argument("--tol-el", type=float, default=1e-3, dest="tol_el")
    sp.add_argument("--tol-decay", type=float, default=0.10, dest="tol_decay")
    sp.add_argument("--tol-tail", type=float, default=0.02, dest="tol_tail")
    sp.add_argument("--tol-phi", type=float, default=1e-3, dest="tol_phi")


def build_parser():
    parser = _Parser(prog="pchoquard", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    solve = sub.add_parser("solve", help="shooting solve plus verification")
    solve.add_argument("--p", type=float, required=True)
    _add_common(solve)
    solve.set_defaults(func=cmd_solve)

    minimize = sub.add_parser(
        "minimize", help="gradient-descent solve with perturbed restarts"
    )
    minimize.add_argument("--p", type=float, required=True)
    minimize.add_argument("--restarts", type=int, default=5)
    minimize.add_argument(
        "--seed-shape", type=str, default="gaussian:2", dest="seed_shape"
    )
    _add_common(minimize)
    minimize.set_defaults(func=cmd_minimize)

    sweep = sub.add_parser("sweep", help="shooting solve over a list of p")
    sweep.add_argument("--p", type=str, default="2,2.5,3,3.5,4")
    _add_common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    verify = sub.add_parser("verify", help="re-run checks on a stored profile")
    verify.add_argument("csv", type=str)
    verify.add_argument("--p", type=float, required=True)
    _add_common(verify)
    verify.set_defaults(func=cmd_verify)

    rear = sub.add_parser(
        "rearrange-test", help="rearrangement inequality battery"
    )
    rear.add_argument("--p", type=float, default=3.0)
    rear.add_argument("--count", type=int, default=_REARRANGE_COUNT)
    _add_common(rear)
    rear.set_defaults(func=cmd_rearrange_test)

    return parser


def _write_json(path, obj):
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )


def _grid_config(args):
    return {"r_max": args.r_max, "n": args.n, "stretch": args.stretch}


def _thresholds(args):
    return {
        "pohozaev": args.tol_pohozaev,
        "el_residual": args.tol_el,
        "decay": args.tol_decay,
        "tail": args.tol_tail,
    }


def _manifest(command, args, config, outputs):
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "seeds": {"seed": args.seed, "gn_seed": _GN_SEED},
        "outputs": outputs,
        "status": "running",
        "duration_seconds": None,
    }


def _finish_manifest(path, manifest, t0, status, extra=None):
    manifest["status"] = status
    manifest["duration_seconds"] = round(time.monotonic() - t0, 3)
    if extra:
        manifest.update(extra)
    _write_json(path, manifest)


def _print_checks(doc, stream=sys.stdout):
    for check in doc["checks"]:
        verdict = "PASS" if check["pass"] else "FAIL"
        print(f"{verdict} {check['name']}", file=stream)


def cmd_solve(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(r_max=args.r_max, n=args.n, stretch=args.stretch)
    cfg = ShootingConfig(
        p=args.p,
        r_max=args.r_max,
        rtol=args.tol_ode,
        atol=args.tol_ode,
        bisect_tol=args.tol_bisect,
    )
    config = {
        "grid": _grid_config(args),
        "shooting": cfg.to_json_dict(),
        "thresholds": _thresholds(args),
        "gn": {"count": _GN_COUNT, "seed": _GN_SEED},
    }
    outputs = {
        "ground_state": "ground_state.csv",
        "trajectory": "trajectory.csv",
        "shooting": "shooting.json",
        "verify": "verify.json",
    }
    manifest = _manifest("solve", args, config, outputs)
    manifest_path = out / "manifest.json"
    _write_json(manifest_path, manifest)
    t0 = time.monotonic()
    try:
        outcome = find_separatrix(cfg, grid)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        _finish_manifest(
            manifest_path, manifest, t0, "solver-failure", {"error": str(exc)}
        )
        return EXIT_SOLVER
    outcome.ground_state.to_csv(out / "ground_state.csv")
    outcome.trajectory.to_csv(out / "trajectory.csv")
    _write_json(out / "shooting.json", outcome.to_json_dict())
    # verification reloads from the CSV so `verify` later reproduces it bytewise
    gs = load_ground_state(out / "ground_state.csv", args.p)
    doc = verification_document(
        gs, gn_count=_GN_COUNT, gn_seed=_GN_SEED, thresholds=_thresholds(args)
    )
    _write_json(out / "verify.json", doc)
    failed = [c["name"] for c in doc["checks"] if not c["pass"]]
    _finish_manifest(
        manifest_path,
        manifest,
        t0,
        "complete",
        {"verification": {"all_pass": doc["all_pass"], "failed": failed}},
    )
    _print_checks(doc)
    return EXIT_OK if doc["all_pass"] else EXIT_VERIFY


def cmd_minimize(args):
    if args.restarts < 1:
        raise _UsageError("--restarts must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(r_max=args.r_max, n=args.n, stretch=args.stretch)
    fcfg = FlowConfig(
        p=args.p,
        seed_shape=args.seed_shape,
        grad_tol=args.tol_grad,
        seed=args.seed,
    )
    config = {
        "grid": _grid_config(args),
        "flow": fcfg.to_json_dict(),
        "restarts": args.restarts,
        "tol_phi": args.tol_phi,
    }
    outputs = {
        "profiles": [f"restart_{i:02d}.csv" for i in range(args.restarts)],
        "phi_matrix": "phi_matrix.json",
    }
    manifest = _manifest("minimize", args, config, outputs)
    manifest_path = out / "manifest.json"
    _write_json(manifest_path, manifest)
    t0 = time.monotonic()
    try:
        if args.restarts == 1:
            results = [minimize_weinstein(fcfg, grid)]
        else:
            results = perturbed_restarts(fcfg, args.restarts, grid)
    except NonConvergence as exc:
        print(f"flow did not converge: {exc}", file=sys.stderr)
        _finish_manifest(
            manifest_path, manifest, t0, "solver-failure", {"error": str(exc)}
        )
        return EXIT_SOLVER
    states = []
    for i, res in enumerate(results):
        digest = config_digest(
            {
                "config": fcfg.to_json_dict(),
                "grid": _grid_config(args),
                "restart": i,
            }
        )
        q = normalize_to_EL(res.profile, args.p)
        gs = make_ground_state(
            args.p, q, provenance="flow", config_hash=digest
        )
        gs.to_csv(out / f"restart_{i:02d}.csv")
        states.append(gs)
    threshold = args.tol_phi * states[0].q0()
    matrix = [
        [
            0.0 if i == j else uniqueness_probe(states[i], states[j]).sup_phi
            for j in range(len(states))
        ]
        for i in range(len(states))
    ]
    max_phi = max(max(row) for row in matrix)
    phi_doc = {
        "matrix": matrix,
        "max_phi": max_phi,
        "threshold": threshold,
        "flow": [res.to_json_dict() for res in results],
        "pass": max_phi < threshold,
    }
    _write_json(out / "phi_matrix.json", phi_doc)
    _finish_manifest(
        manifest_path,
        manifest,
        t0,
        "complete",
        {"verification": {"all_pass": phi_doc["pass"], "max_phi": max_phi}},
    )
    verdict = "PASS" if phi_doc["pass"] else "FAIL"
    print(f"{verdict} uniqueness (max phi {max_phi:.3e} vs {threshold:.3e})")
    return EXIT_OK if phi_doc["pass"] else EXIT_VERIFY


def _parse_p_list(text):
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError as exc:
            raise _UsageError(f"bad p value {token!r}") from exc
    if not values:
        raise _UsageError("empty p list")
    unique = []
    for p in values:
        if p in unique:
            print(f"warning: duplicate p = {p:g} skipped", file=sys.stderr)
        else:
            unique.append(p)
    return unique


def cmd_sweep(args):
    ps = _parse_p_list(args.p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "grid": _grid_config(args),
        "p_list": ps,
        "thresholds": _thresholds(args),
    }
    outputs = {
        "sweep": "sweep.csv",
        "runs": [f"p{p:g}" for p in ps],
    }
    manifest = _manifest("sweep", args, config, outputs)
    manifest_path = out / "manifest.json"
    _write_json(manifest_path, manifest)
    t0 = time.monotonic()
    rows = []
    failures = {}
    for p in ps:
        run_dir = out / f"p{p:g}"
        sub_args = argparse.Namespace(**vars(args))
        sub_args.p = p
        sub_args.out = str(run_dir)
        code = cmd_solve(sub_args)
        if code != EXIT_OK:
            failures[f"{p:g}"] = code
            continue
        gs = load_ground_state(run_dir / "ground_state.csv", p)
        w = weinstein(gs.Q, p).value
        fit = decay_fit(gs)
        rows.append(
            (p, gs.k, gs.grad_sq, gs.lp_mass, gs.coulomb, w, 1.0 / w,
             fit.exponent)
        )
    with open(out / "sweep.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("p,k,grad_sq,lp_mass,coulomb,weinstein,c_gn,decay_exponent\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    status = "complete" if not failures else "partial-failure"
    _finish_manifest(
        manifest_path, manifest, t0, status, {"failures": failures}
    )
    if failures:
        print(f"sweep failures: {failures}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "csv": str(args.csv),
        "p": args.p,
        "thresholds": _thresholds(args),
        "gn": {"count": _GN_COUNT, "seed": _GN_SEED},
    }
    manifest = _manifest("verify", args, config, {"verify": "verify.json"})
    manifest_path = out / "manifest.json"
    _write_json(manifest_path, manifest)
    t0 = time.monotonic()
    try:
        gs = load_ground_state(args.csv, args.p)
    except VerificationFailure as exc:
        print(f"profile rejected: {exc}", file=sys.stderr)
        _finish_manifest(
            manifest_path, manifest, t0, "verify-failure", {"error": str(exc)}
        )
        return EXIT_VERIFY
    doc = verification_document(
        gs, gn_count=_GN_COUNT, gn_seed=_GN_SEED, thresholds=_thresholds(args)
    )
    _write_json(out / "verify.json", doc)
    failed = [c["name"] for c in doc["checks"] if not c["pass"]]
    _finish_manifest(
        manifest_path,
        manifest,
        t0,
        "complete",
        {"verification": {"all_pass": doc["all_pass"], "failed": failed}},
    )
    _print_checks(doc)
    return EXIT_OK if doc["all_pass"] else EXIT_VERIFY


def cmd_rearrange_test(args):
    if args.count < 1:
        raise _UsageError("--count must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "grid": _grid_config(args),
        "p": args.p,
        "count": args.count,
        "seed": args.seed,
    }
    manifest = _manifest(
        "rearrange-test", args, config, {"report": "rearrange_report.json"}
    )
    manifest_path = out / "manifest.json"
    _write_json(manifest_path, manifest)
    t0 = time.monotonic()
    grid = make_grid(r_max=args.r_max, n=args.n, stretch=args.stretch)
    violations = []
    max_gap = 0.0
    for i in range(args.count):
        rng = Xorshift64Star(args.seed, stream=i)
        u = random_bumps(grid, rng)
        report = rearrangement_report(u, args.p)
        star = schwarz_rearrange(u)
        gap = equimeasurability_gap(u, star)
        max_gap = max(max_gap, gap)
        if not report.all_ok:
            violations.append({"sample": i, "report": report.to_json_dict()})
    doc = {
        "count": args.count,
        "p": args.p,
        "seed": args.seed,
        "violations": violations,
        "max_equimeasurability_gap": max_gap,
        "pass": not violations and max_gap < 1e-6,
    }
    _write_json(out / "rearrange_report.json", doc)
    _finish_manifest(
        manifest_path,
        manifest,
        t0,
        "complete",
        {"verification": {"all_pass": doc["pass"]}},
    )
    verdict = "PASS" if doc["pass"] else "FAIL"
    print(
        f"{verdict} rearrangement battery "
        f"({args.count} samples, {len(violations)} violations)"
    )
    return EXIT_OK if doc["pass"] else EXIT_VERIFY


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverFailure, NonConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
