"""Command-line interface.

Exit codes: 0 success, 1 invariant violations reported as findings,
2 usage or structural errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import closure, genericity, laplacian, transport
from .experiments import ExperimentConfig, run_montecarlo
from .space import (
    NumericPolicy,
    StructuralError,
    as_exact,
    as_float,
    dump_space,
    load_space,
    random_euclidean,
    random_graph_metric,
    space_to_json,
    validate,
)

EXIT_OK, EXIT_FINDING, EXIT_USAGE = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isinf(x) or math.isnan(x) else x
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(doc, out=None) -> None:
    text = json.dumps(_jsonable(doc), indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load(path: str, mode: str):
    space = load_space(path, exact=None if mode == "auto" else mode == "exact")
    return space


def _policy(args, space) -> NumericPolicy:
    if space.exact:
        return NumericPolicy.exact_mode()
    return NumericPolicy(tol_group=args.tol_group)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["auto", "exact", "float"], default="auto",
                   help="numeric mode; auto = exact iff every JSON number is an integer or 'p/q'")
    p.add_argument("--tol-group", type=float, default=1e-9, help="relative grouping tolerance (float mode)")


def cmd_validate(args) -> int:
    space = _load(args.space, args.mode)
    rep = validate(space, _policy(args, space))
    _emit(rep.to_json())
    return EXIT_OK if rep.ok else EXIT_FINDING


def cmd_generate(args) -> int:
    if args.kind == "euclidean":
        space = random_euclidean(args.n, args.dim, args.seed, args.measure)
    else:
        space = random_graph_metric(args.n, args.seed, measure=args.measure, exact=True)
    if args.mode == "exact":
        space = as_exact(space)
    elif args.mode == "float":
        space = as_float(space)
    if args.out:
        dump_space(space, args.out)
    else:
        print(json.dumps(space_to_json(space), indent=2))
    return EXIT_OK


def cmd_closure(args) -> int:
    space = _load(args.space, args.mode)
    part = closure.coherent_closure(space, _policy(args, space))
    rep = closure.verify_configuration(part)
    if args.format == "csv":
        text = part.to_csv()
        if args.out:
            open(args.out, "w").write(text)
        else:
            sys.stdout.write(text)
    else:
        doc = part.to_json()
        doc["axioms_ok"] = rep.ok
        doc["violations"] = [list(v) for v in rep.violations]
        _emit(doc, args.out)
    return EXIT_OK if rep.ok else EXIT_FINDING


def cmd_fullness(args) -> int:
    space = _load(args.space, args.mode)
    cert = closure.fullness(closure.coherent_closure(space, _policy(args, space)))
    _emit(cert.to_json())
    return EXIT_OK


def cmd_genericity(args) -> int:
    space = _load(args.space, args.mode)
    policy = _policy(args, space)
    cache = genericity.PowerCache(space)
    cert = genericity.check_nmp(space, args.N, args.m, args.p, cache)
    n_min, margin = genericity.separation_profile(space, args.N_max or args.N, policy, cache)
    off, diag = genericity.density_condition(space, policy)
    doc = cert.to_json()
    doc["separation_profile"] = {"N_min": n_min, "margin": margin}
    doc["density_condition"] = {"off_diag_injective": off, "diag_power2_injective": diag}
    _emit(doc)
    return EXIT_OK


def cmd_laplacian(args) -> int:
    space = _load(args.space, args.mode)
    try:
        bundle = laplacian.build_laplacian(space)
    except laplacian.UnsupportedMeasureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    checks = [c.strip() for c in args.check.split(",") if c.strip()]
    known = {"membership", "variational", "psd", "hadamard"}
    unknown = set(checks) - known
    if unknown:
        print(f"error: unknown checks {sorted(unknown)}; choose from {sorted(known)}", file=sys.stderr)
        return EXIT_USAGE
    report: dict = {"delta": bundle.delta}
    ok = True
    if "membership" in checks:
        part = closure.coherent_closure(space, _policy(args, space))
        good, k = laplacian.membership_check(bundle, part)
        report["membership"] = {"ok": good, "violating_class": k}
        ok &= good
    if "variational" in checks:
        res = laplacian.variational_check(bundle, args.trials, args.seed)
        report["variational"] = {"ok": res <= 1e-10, "max_residual": res}
        ok &= res <= 1e-10
    if "psd" in checks:
        good, lo = laplacian.psd_check(bundle)
        report["psd"] = {"ok": good, "min_eigenvalue": lo}
        ok &= good
    if "hadamard" in checks:
        res = laplacian.hadamard_inverse_identity(space)
        report["hadamard"] = {"ok": res <= 1e-12, "max_residual": res}
        ok &= res <= 1e-12
    _emit(report)
    return EXIT_OK if ok else EXIT_FINDING


def _parse_real(text: str):
    return Fraction(text) if "/" in text else float(text)


def cmd_census(args) -> int:
    space = _load(args.space, args.mode)
    a, b = _parse_real(args.a), _parse_real(args.b)
    if space.exact:
        a, b = Fraction(a), Fraction(b)
    if a > b:
        print("error: need a <= b", file=sys.stderr)
        return EXIT_USAGE
    k = laplacian.interval_census(space, a, b, weighted=args.weighted)
    if args.format == "csv":
        sys.stdout.write(k.to_csv())
    else:
        _emit({"labels": list(space.labels), "a": a, "b": b, "values": k.values,
               "diagonal": [k.values[i, i] for i in range(space.n)]})
    return EXIT_OK


def cmd_distance(args) -> int:
    X = _load(args.a, args.mode)
    Y = _load(args.b, args.mode)
    est = transport.dp_estimate(X, Y, args.p, args.budget, args.seed)
    doc = {
        "upper": est.upper,
        "exact": est.exact,
        "map": est.map.to_json(X, Y)["map"],
        "components": {k: v for k, v in est.map.to_json().items() if k != "map"},
        "evaluations": est.evaluations,
    }
    if args.symmetric:
        back = transport.dp_estimate(Y, X, args.p, args.budget, args.seed)
        doc["reverse_upper"] = back.upper
        doc["symmetrized"] = est.upper + back.upper
        doc["reverse_exact"] = back.exact
    _emit(doc)
    return EXIT_OK


def _parse_n_range(items: list[str]) -> tuple[int, ...]:
    out: list[int] = []
    for item in items:
        if ".." in item:
            lo, hi = item.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(item))
    return tuple(out)


def cmd_montecarlo(args) -> int:
    policy = NumericPolicy.exact_mode() if args.mode == "exact" else NumericPolicy(tol_group=args.tol_group)
    cfg = ExperimentConfig(
        n_range=_parse_n_range(args.n), samples=args.samples, dim=args.dim, measure_mode=args.measure,
        seed=args.seed, policy=policy, N_max=args.N_max, csv_path=args.csv, json_path=args.json,
        include_timing=args.timing,
    )
    _, summary = run_montecarlo(cfg, workers=args.threads)
    if not args.json:
        _emit(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohmms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check metric-measure invariants")
    p.add_argument("--space", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a random space as JSON")
    p.add_argument("--kind", choices=["euclidean", "graph"], default="euclidean")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", default="uniform", help="uniform | random-simplex (graph: also two-level)")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--mode", choices=["auto", "exact", "float"], default="auto")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("closure", help="coherent partition of X x X")
    p.add_argument("--space", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("fullness", help="fullness certificate")
    p.add_argument("--space", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fullness)

    p = sub.add_parser("genericity", help="(N, m, p) separation certificate")
    p.add_argument("--space", required=True)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--N-max", dest="N_max", type=int, default=None, help="bound for the separation profile")
    _add_common(p)
    p.set_defaults(func=cmd_genericity)

    p = sub.add_parser("laplacian", help="metric Laplacian checks (uniform measure only)")
    p.add_argument("--space", required=True)
    p.add_argument("--check", default="membership,variational,psd",
                   help="comma list from membership, variational, psd, hadamard")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("census", help="square of the interval indicator chi_[a,b](d)")
    p.add_argument("--space", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--weighted", action="store_true", help="use mu-convolution instead of the matrix square")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _add_common(p)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("distance", help="upper bound on D_p between two spaces")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--budget", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symmetric", action="store_true", help="also report D_p(b, a) and the sum")
    _add_common(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("montecarlo", help="fullness frequencies of random Euclidean spaces")
    p.add_argument("--n", nargs="+", required=True, help="point counts, e.g. 3 4 5 or 3..8")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--measure", choices=["uniform", "random-simplex"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--N-max", dest="N_max", type=int, default=2)
    p.add_argument("--csv", help="row table output path")
    p.add_argument("--json", help="summary output path (stdout when omitted)")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: $COHMMS_THREADS or 1)")
    p.add_argument("--timing", action="store_true", help="add an elapsed_ms column (breaks byte-identical reruns)")
    _add_common(p)
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (StructuralError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
