"""``conewish`` command line.

Exit codes: 0 success, 1 usage or parse error, 2 domain error (point not in
the cone, invalid multiplier, condition (F) violated ...), 3 a verification
or statistical suite failed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import characterize as ch
from . import io as cio
from .algebra import verify_axioms
from .cone import ConePoint, component_decomposition, decompose
from .poset import ConditionFError, CycleError, Poset, PosetParseError
from .wishart import Multiplier, WishartModel, admissible_constraints

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_STAT = 0, 1, 2, 3

_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------
# helpers

def _poset(args) -> Poset:
    path = getattr(args, "path", None) or args.poset
    if path is None:
        raise UsageError("a poset file is required (positional or --poset)")
    try:
        return cio.read_poset(path)
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _lambdas(args, poset: Poset, name: str = "lambda_") -> Multiplier:
    raw = getattr(args, name)
    if raw is None:
        raise UsageError("--lambda is required")
    try:
        vals = [float(v) for v in raw.split(",")]
    except ValueError:
        raise UsageError(f"--lambda must be a comma list of numbers, got {raw!r}") from None
    if len(vals) != len(poset):
        raise UsageError(f"--lambda needs {len(poset)} values (order {','.join(poset.labels)})")
    return Multiplier(poset, vals).validate()


def _sigma(args, chi: Multiplier):
    if args.sigma in (None, "standard"):
        return None
    return ConePoint.from_matrix(cio.read_matrix(args.sigma, chi.poset))


def _emit(args, name: str, text: str):
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _sub(label: str) -> str:
    return label.translate(_SUB) if label.isdigit() else f"_{label}"


def _set(xs, poset: Poset) -> str:
    return "{" + ", ".join(sorted(xs, key=poset.index)) + "}"


def _summary_line(p: Poset) -> str:
    v = p.check_condition_F()
    f = "ok" if v is None else "violated"
    cons = ", ".join(c.replace(f"λ{lab}>", f"λ{_sub(lab)}>", 1)
                     for c, lab in zip(admissible_constraints(p), p.labels))
    return f"F: {f}; sources: {_set(p.sources(), p)}; 𝒳: {cons}"


# ----------------------------------------------------------------------
# commands

def cmd_poset(args) -> int:
    p = _poset(args)
    v = p.check_condition_F()
    lines = [_summary_line(p)]
    if v is not None:
        lines.append(f"witness: {' < '.join(v.path_a)}")
        lines.append(f"witness: {' < '.join(v.path_b)}")
    if args.action == "describe":
        d = p.dims()
        lines.append(f"linear extension: {' '.join(p.labels)}")
        lines.append(f"hash: {p.content_hash()}")
        lines.append(f"minimal elements: {_set(p.minimal_elements(), p)}")
        if v is None:
            seps = p.separators()
            for lab in p.labels:
                if seps.per_element[lab]:
                    lines.append(f"S_{lab}: {_set(seps.per_element[lab], p)}")
            lines.append(f"S: {_set(seps.minimal, p)}")
        lines.append("i\tn_i.\tn_.i\tn_i")
        for i, a, b, c in d.as_rows(p.labels):
            lines.append(f"{i}\t{a}\t{b}\t{c:g}")
        lines.append(f"n..\t{d.n_dotdot:g}")
    print("\n".join(lines))
    return EXIT_OK if v is None else EXIT_DOMAIN


def cmd_algebra(args) -> int:
    p = _poset(args)
    tol = args.tolerance if args.tolerance is not None else 1e-10
    rep = verify_axioms(p, trials=args.trials, seed=args.seed, tol=tol)
    if args.json:
        _emit(args, "axioms.json", cio.dump_json(rep.to_dict()))
    else:
        rows = [f"{'axiom':<6}{'max residual':>14}  verdict  identity"]
        for r in rep.results:
            rows.append(f"{r.axiom:<6}{r.max_residual:>14.3e}  {'PASS' if r.passed else 'FAIL':<7}  {r.identity}")
        _emit(args, "axioms.txt", "\n".join(rows) + "\n")
    return EXIT_OK if rep.passed else EXIT_STAT


def cmd_cone(args) -> int:
    p = _poset(args)
    if args.matrix is None:
        raise UsageError("--matrix is required")
    x = cio.read_matrix(args.matrix, p)
    tol = args.tolerance if args.tolerance is not None else 1e-12
    if args.action == "decompose":
        f = decompose(x, tol=tol)
        out = {"poset_hash": p.content_hash(), "labels": list(p.labels), **f.labeled()}
    else:
        comps = component_decomposition(ConePoint(x, decompose(x, tol=tol)))
        out = {"poset_hash": p.content_hash(), "labels": list(p.labels),
               "components": {k: v.entries for k, v in comps.items()}}
    _emit(args, f"{args.action}.json", cio.dump_json(out))
    return EXIT_OK


def cmd_wishart(args) -> int:
    p = _poset(args)
    chi = _lambdas(args, p)
    sigma = _sigma(args, chi)
    model = WishartModel(chi, sigma)
    config = {"lambda": chi.to_dict(), "sigma": "standard" if sigma is None else sigma.entries,
              "seed": args.seed}
    if args.action == "sample":
        xs = model.draw(args.draws, args.seed)
        man = cio.manifest(p, "wishart sample", draws=args.draws, **config)
        if args.out:
            _emit(args, "samples.csv", cio.samples_to_csv(xs, p))
            _emit(args, "manifest.json", cio.dump_json(man))
        else:
            sys.stdout.write(cio.samples_to_csv(xs, p))
        return EXIT_OK
    if args.action == "density":
        if args.at is None:
            raise UsageError("--at MATRIX is required")
        x = cio.read_matrix(args.at, p)
        ld = model.log_density(ConePoint(x, decompose(x)))
        out = {"log_density": ld, "density": float(np.exp(ld))}
    else:
        if args.theta is None:
            raise UsageError("--theta is required (a matrix file or 0)")
        if args.theta.strip() == "0":
            theta = np.zeros((len(p), len(p)))
        else:
            theta = cio.read_matrix(args.theta, p).entries
        ll = model.log_laplace(theta)
        out = {"log_laplace": ll, "laplace": float(np.exp(ll))}
    out["manifest"] = cio.manifest(p, f"wishart {args.action}", **config)
    _emit(args, f"{args.action}.json", cio.dump_json(out))
    return EXIT_OK


def cmd_characterize(args) -> int:
    p = _poset(args)
    chi = _lambdas(args, p)
    chi_p = _lambdas(args, p, "lambda_prime") if args.lambda_prime else chi
    p.require_condition_F()
    start = time.perf_counter()
    reports = ch.run_suite(chi, chi_p, suite=args.suite, seed=args.seed, draws=args.draws)
    elapsed = time.perf_counter() - start
    ok = all(r.verdict for r in reports)
    lines = [r.to_text() for r in reports]
    lines.append(f"{sum(r.verdict for r in reports)}/{len(reports)} checks pass; "
                 f"suite false-alarm bound {ch.false_alarm_estimate(reports):.3f}")
    text = "\n".join(lines) + "\n"
    man = cio.manifest(p, "characterize run", suite=args.suite, seed=args.seed,
                       draws=args.draws, **{"lambda": chi.to_dict(), "lambda_prime": chi_p.to_dict()})
    if args.out:
        _emit(args, "report.txt", text)
        _emit(args, "report.json", cio.dump_json({"manifest": man, "passed": ok,
                                                  "reports": [r.to_dict() for r in reports]}))
    sys.stdout.write(text)
    print(f"elapsed {elapsed:.1f}s", file=sys.stderr)
    return EXIT_OK if ok else EXIT_STAT


# ----------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conewish", description="Wishart distributions on homogeneous cones of posets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("path", nargs="?", help="poset file (same as --poset)")
        sp.add_argument("--poset", help="poset file: 'i < j' lines or JSON")
        sp.add_argument("--out", help="directory for output files (default: stdout)")
        sp.add_argument("--tolerance", type=float, default=None)
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("poset", help="check condition (F) and describe a poset")
    sp.add_argument("action", choices=["check", "describe"])
    common(sp, seed=False)
    sp.set_defaults(func=cmd_poset)

    sp = sub.add_parser("algebra", help="verify the algebra axioms numerically")
    sp.add_argument("action", choices=["verify"])
    common(sp)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_algebra)

    sp = sub.add_parser("cone", help="factorize a cone point or split it into components")
    sp.add_argument("action", choices=["decompose", "components"])
    common(sp, seed=False)
    sp.add_argument("--matrix", help="matrix file (CSV with label header, or JSON)")
    sp.set_defaults(func=cmd_cone)

    sp = sub.add_parser("wishart", help="sample, evaluate the density or the Laplace transform")
    sp.add_argument("action", choices=["sample", "density", "laplace"])
    common(sp)
    sp.add_argument("--lambda", dest="lambda_", help="comma list in linear-extension order")
    sp.add_argument("--sigma", default="standard", help="matrix file or 'standard'")
    sp.add_argument("--draws", type=int, default=1000)
    sp.add_argument("--at", help="matrix file for density")
    sp.add_argument("--theta", help="matrix file for laplace, or 0")
    sp.set_defaults(func=cmd_wishart)

    sp = sub.add_parser("characterize", help="run the Monte-Carlo characterization suite")
    sp.add_argument("action", choices=["run"])
    common(sp)
    sp.add_argument("--lambda", dest="lambda_")
    sp.add_argument("--lambda-prime", dest="lambda_prime", help="shape of the second summand")
    sp.add_argument("--suite", choices=sorted(ch.SUITES), default="standard")
    sp.add_argument("--draws", type=int, default=None, help="override every check's draw count")
    sp.set_defaults(func=cmd_characterize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, PosetParseError, CycleError, cio.MatrixFormatError, OSError) as exc:
        print(f"conewish: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # NotInCone, InvalidMultiplier, StructuralZeroError, ConditionFError ...
        return _domain(exc)


def _domain(exc) -> int:
    print(f"conewish: {type(exc).__name__}: {exc}", file=sys.stderr)
    if isinstance(exc, ConditionFError):
        v = exc.violation
        print(f"witness: {' < '.join(v.path_a)}", file=sys.stderr)
        print(f"witness: {' < '.join(v.path_b)}", file=sys.stderr)
    return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
