"""Command-line entry point ``strichartz-lab``.

Every command validates its configuration before computing, writes a JSON
report that embeds the resolved configuration and the package version, and
optionally writes CSV plot data.

Exit codes: 0 on success, 2 on usage or input errors, 3 when a scientific
check recorded in the report fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from .embeddings import EmbeddingSpec, GeneratorSpec, ensemble_test
from .errors import StrichartzLabError
from .fieldio import read_field, write_field
from .gaussian import GaussianProfile
from .maximizer import SearchConfig, maximize
from .norms import QuotientSpec, evaluate_quotient, parse_exponent
from .profiles import (
    ProfileFamily,
    decomposition_report,
    escaping_frequency_decay,
    stock_family,
)
from .propagator import TimeGrid, mass_defect, propagate
from .spectral import Grid
from .symmetry import ParameterSequence

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 2, 3
THREADS_ENV = "STRICHARTZ_LAB_THREADS"


class UsageError(Exception):
    """Bad arguments or missing inputs (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(report: dict, args, csv_text: str | None = None) -> None:
    report = {"version": __version__, "command": args.command, **report}
    text = _dumps(report)
    if args.json:
        Path(args.json).write_text(text)
    else:
        sys.stdout.write(text)
    if csv_text is not None and args.csv:
        Path(args.csv).write_text(csv_text)


def _exit_for(checks: dict[str, bool]) -> int:
    failed = [name for name, ok in checks.items() if not ok]
    for name in failed:
        print(f"check failed: {name}", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


def _regularity(text: str | None):
    if text is None or text == "auto":
        return None
    return float(text)


def _time_grid(args, d: int) -> TimeGrid:
    if args.t_max is None and args.n_t is None:
        return TimeGrid.default(d)
    base = TimeGrid.default(d)
    half = base.t_max if args.t_max is None else args.t_max
    n_t = base.n_t if args.n_t is None else args.n_t
    return TimeGrid(-half, half, n_t)


# commands

def cmd_propagate(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise UsageError(f"input not found: {src}")
    if not math.isfinite(args.t):
        raise UsageError("--t must be finite")
    u0 = read_field(src)
    u = propagate(u0, args.t)
    write_field(args.out, u)
    defect = mass_defect(u0, u)
    print(f"mass defect {defect:.3e}")
    return EXIT_OK


def cmd_quotient(args) -> int:
    d = args.d
    spec = QuotientSpec.make(args.q, args.r, d, _regularity(args.s), _time_grid(args, d))
    if args.input:
        if not Path(args.input).is_file():
            raise UsageError(f"input not found: {args.input}")
        u0 = read_field(args.input)
        grid = u0.grid
    else:
        grid = Grid.default(d)
        u0 = GaussianProfile(args.width, d=d).sample(grid)
    res = evaluate_quotient(u0, spec)
    print(f"quotient {res.quotient:.6f} tail_bound {res.numerator.tail_bound / res.denominator:.3e}")
    report = {"config": {"source": args.input or f"gaussian(width={args.width})"},
              "result": res.to_json(grid)}
    _emit(report, args)
    return EXIT_OK


def cmd_maximize(args) -> int:
    cfg = SearchConfig.make(args.q, args.r, args.d, _regularity(args.s), max_iters=args.max_iters,
                            tol=args.tol, seed=args.seed)
    rep = maximize(cfg)
    out = rep.to_json()
    checks = {}
    if rep.reference is not None and cfg.spec.s == 0:
        checks["below_gaussian_reference"] = rep.best <= rep.reference + 1e-2
    checks["monotone"] = bool(np.all(np.diff(rep.trajectory) >= 0))
    checks["quadrature_stable"] = rep.quadrature_gap < 2e-2
    out["checks"] = checks
    if args.out_field:
        write_field(args.out_field, rep.field)
    csv_text = "iteration,quotient,residual\n" + "".join(
        f"{i},{q!r},{g!r}\n" for i, (q, g) in enumerate(zip(rep.trajectory, rep.residuals)))
    _emit(out, args, csv_text)
    print(f"quotient_estimate {rep.best:.6f} iters {rep.iters}", file=sys.stderr)
    return _exit_for(checks)


def _superposition_pairs(text: str | None, d: int):
    if not text:
        return None
    pairs = []
    for chunk in text.split(";"):
        q, r = chunk.split(",")
        pairs.append((float(parse_exponent(q)), float(parse_exponent(r))))
    return pairs


def cmd_profiles(args) -> int:
    if args.spec:
        if not Path(args.spec).is_file():
            raise UsageError(f"input not found: {args.spec}")
        pf = ProfileFamily.from_json(json.loads(Path(args.spec).read_text()))
    else:
        pf = stock_family(args.depth, args.ratio, args.modulation, not args.no_error)
    pairs = _superposition_pairs(args.pairs, pf.d)
    rep = decomposition_report(pf, superposition_pairs=pairs, backend=args.backend)
    last = rep.rows[-1]
    checks = {
        "cross_terms_strictly_decrease": all(
            bool(np.all(np.diff(rep.series("cross_terms", key)) < 0)) for key in last["cross_terms"]),
        "pythagorean_below_1e-2": last["pythagorean_rel"] < 1e-2,
        "inner_products_decrease": bool(np.all(np.diff(rep.series("inner_max")) < 0)),
    }
    for key, value in last["superposition"].items():
        checks[f"superposition_{key}_limsup_below_5e-3"] = value <= 5e-3
    out = rep.to_json()
    out["checks"] = checks
    _emit(out, args, rep.to_csv())
    return _exit_for(checks)


def cmd_embeddings(args) -> int:
    spec = EmbeddingSpec(args.s, args.d, args.r, args.cutoff)
    gen = GeneratorSpec(args.generator, {}, args.seed)
    rep = ensemble_test(spec, gen, args.samples)
    sq2 = rep.column("square_2")
    checks = {
        "all_finite": rep.all_finite,
        "dilation_invariance": rep.max_dilation_residual < 1e-6,
        "besov_bound": rep.besov_bound_holds,
        "dominance": rep.dominance_holds,
        "square_function_p2": bool(np.all(np.abs(sq2 - 1) < 1e-12)) if spec.cutoff == "sharp" else True,
        "within_pinned_brackets": not rep.violations,
    }
    out = rep.to_json()
    out["checks"] = checks
    _emit(out, args, rep.to_csv())
    return _exit_for(checks)


def cmd_decay(args) -> int:
    n = np.arange(args.start, args.start + args.depth)
    seq = ParameterSequence.from_arrays("decay", np.ones(n.size), 2.0 ** n.astype(float))
    res = escaping_frequency_decay(GaussianProfile(args.width), args.s, seq, args.q, args.r)
    checks = {"slope_within_10_percent": res.relative_slope_error <= 0.1}
    out = {"config": {"s": args.s, "q": args.q, "r": args.r, "depth": args.depth, "start": args.start,
                      "width": args.width, "h": 1.0, "xi": "2^n"},
           "n": n.tolist(), "frequencies": res.frequencies.tolist(), "norms": res.norms.tolist(),
           "fitted_slope": res.slope, "relative_slope_error": res.relative_slope_error,
           "checks": checks}
    csv_text = "n,|h*xi|,norm\n" + "".join(
        f"{k},{f!r},{v!r}\n" for k, f, v in zip(n.tolist(), res.frequencies.tolist(), res.norms.tolist()))
    _emit(out, args, csv_text)
    return _exit_for(checks)


# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strichartz-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help=f"FFT worker cap (fallback: ${THREADS_ENV})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def outputs(p, csv=True):
        p.add_argument("--json", help="write the JSON report here instead of stdout")
        if csv:
            p.add_argument("--csv", help="write CSV plot data here")

    p = sub.add_parser("propagate", help="evolve an FLD1 field to time t")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("quotient", help="tail-corrected Strichartz quotient")
    p.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--q", default="6")
    p.add_argument("--r", default="6")
    p.add_argument("--s", default="0", help="regularity, or 'auto' for s(q,r)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--gaussian", action="store_true", help="use exp(-|x|^2/width^2) (default)")
    src.add_argument("--in", dest="input")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--t-max", type=float)
    p.add_argument("--n-t", type=int)
    outputs(p, csv=False)
    p.set_defaults(func=cmd_quotient, csv=None)

    p = sub.add_parser("maximize", help="projected gradient ascent for the sharp constant")
    p.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--q", default="6")
    p.add_argument("--r", default="6")
    p.add_argument("--s", default="0", help="regularity, or 'auto' for s(q,r)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--out-field", help="write the final iterate as FLD1")
    outputs(p)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("profiles", help="orthogonality diagnostics of a profile family")
    p.add_argument("--spec", help="ProfileFamily JSON; defaults to the stock family")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--ratio", type=float, default=4.0)
    p.add_argument("--modulation", type=float, default=4.0)
    p.add_argument("--no-error", action="store_true")
    p.add_argument("--pairs", help="superposition exponent pairs, e.g. '6,6;8,4'")
    p.add_argument("--backend", default="auto", choices=("auto", "exact", "grid"))
    outputs(p)
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("embeddings", help="improved Sobolev embedding ensemble")
    p.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--r", type=float)
    p.add_argument("--cutoff", default="sharp", choices=("sharp", "smooth"))
    p.add_argument("--generator", default="mixed",
                   choices=("mixed", "gaussian", "multibump", "bandlimited", "lacunary"))
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    outputs(p)
    p.set_defaults(func=cmd_embeddings)

    p = sub.add_parser("decay", help="escaping-frequency decay slope")
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--q", default="8")
    p.add_argument("--r", default="4")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--start", type=int, default=2, help="first n, with xi_n = 2^n")
    p.add_argument("--width", type=float, default=1.0)
    outputs(p)
    p.set_defaults(func=cmd_decay)
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        value = args.threads
    elif os.environ.get(THREADS_ENV):
        try:
            value = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    else:
        return None
    if value < 1:
        raise UsageError("thread count must be positive")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        workers = _threads(args)
        with sfft.set_workers(workers) if workers else nullcontext():
            return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StrichartzLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"input not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
