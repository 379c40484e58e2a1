"""Command line front end.

Exit codes: 0 success, 1 usage or input error, 2 verification failure,
3 assumption failure, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import io
from .critical import (
    AssumptionError,
    ContinuationOptions,
    CriticalizationError,
    criticalize,
    find_critical_tilting,
)
from .harness import assert_critical, certify_equivalence, local_limit_experiment
from .pgf import check_assumptions, mean_matrix, spectral_radius
from .tilting import NormalizationError, apply_tilt, rationalize_tilt
from .trees import (
    ConditionedSamplingError,
    EnumerationBudgetError,
    SamplerOptions,
    build_kesten_spec,
    enumerate_conditioned,
    sample_conditioned,
    sample_kesten_ball,
)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_ASSUMPTION, EXIT_NUMERIC = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(args):
    model, condition = io.load_model(args.model)
    if condition is None:
        raise _Failure(EXIT_USAGE, f"{args.model}: model file has no gamma or gamma_matrix")
    return model, condition


def _emit(args, report, summary):
    if getattr(args, "out", None):
        io.write_json(args.out, report)
    print(summary)


def _root(args, model):
    if not 1 <= args.root <= model.num_types:
        raise _Failure(EXIT_USAGE, f"--root must lie in 1..{model.num_types}")
    return args.root - 1


def _g(text):
    return tuple(Fraction(v) for v in text.split(","))


def cmd_check(args):
    model, condition = _load(args)
    rep = check_assumptions(model, condition.gamma_matrix, a3_bound=args.a3_bound)
    m = mean_matrix(model)
    data = {"schema": 1, "kind": "check", "model": model.name, "assumptions": rep.as_dict(),
            "spectral_radius": spectral_radius(m)}
    lines = [f"A.1 entire: {rep.entire.status}", f"A.2 empty word: {rep.empty_word.status}",
             f"A.3 escape: {rep.escape_verdict.status}", f"B condition: {rep.condition.status}",
             f"irreducible: {rep.irreducible.status}", f"spectral radius: {data['spectral_radius']:.12g}"]
    _emit(args, data, "\n".join(lines))
    # the escape condition is reported; only the structural ones decide the exit code
    if not (rep.entire.ok and rep.empty_word.ok and rep.condition.ok):
        return EXIT_ASSUMPTION
    return EXIT_OK


def _continuation(args):
    return ContinuationOptions(domain_bound=args.domain_bound, rho_tol=args.rho_tol,
                               allow_escape_failure=args.allow_escape_failure)


def cmd_criticalize(args):
    model, condition = _load(args)
    res = find_critical_tilting(model, condition, _continuation(args))
    exact = rationalize_tilt(model, condition, res.params) if model.is_exact else None
    data = {"schema": 1, "kind": "tilt", "model": model.name, "tilt": res.params.to_json(),
            "exact_b": None if exact is None else [str(v) for v in exact.b],
            "diagnostics": res.diagnostics}
    if args.trace_out:
        io.write_trace_csv(args.trace_out, res.trace)
    b = ", ".join(f"{v:.10g}" for v in res.b)
    _emit(args, data, f"critical tilt: b = ({b}), beta = {res.beta:.10g}, rho~ = {res.rho_tilde:.12g}")
    if abs(res.tilted_rho - 1.0) > 1e-8 or not res.good:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_tilt(args):
    model, condition = _load(args)
    params = io.load_tilt(args.tilt)
    tilted = apply_tilt(model, params)
    rho = spectral_radius(mean_matrix(tilted))
    out = io.model_to_dict(tilted, condition)
    if args.out:
        io.write_json(args.out, out)
    print(f"tilted model written; spectral radius {rho:.12g}")
    if abs(rho - 1.0) > 1e-8:
        print("tilted model is not critical (stale or foreign tilt file?)", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_sample(args):
    model, condition = _load(args)
    root = _root(args, model)
    rng = np.random.default_rng(args.seed)
    opts = SamplerOptions(criticalize=not args.no_criticalize, max_attempts=args.max_attempts,
                          continuation=_continuation(args))
    s = sample_conditioned(model, root, condition, _g(args.g), rng, opts, n=args.n)
    if opts.criticalize:
        assert_critical(s.model)
    lines = [t.serialize() for t in s.trees]
    if args.trees:
        with open(args.trees, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    data = {"schema": 1, "kind": "sample", "model": model.name, "root_type": args.root, "g": args.g,
            "seed": args.seed, "samples": len(lines), "attempts": s.attempts,
            "tilt": None if s.tilt is None else s.tilt.params.to_json(), "trees": lines if not args.trees else None}
    _emit(args, data, f"{len(lines)} trees after {s.attempts} attempts")
    return EXIT_OK


def cmd_enumerate(args):
    model, _cond = _load(args)
    root = _root(args, model)
    ens = enumerate_conditioned(model, root, _cond, _g(args.g), args.node_budget)
    if args.csv:
        io.write_ensemble_csv(args.csv, ens)
    z = ens.partition_function
    data = {"schema": 1, "kind": "enumerate", "model": model.name, "root_type": args.root, "g": args.g,
            "trees": len(ens), "Z": str(z),
            "note": "no tree satisfies the condition (Z = 0)" if not ens.trees else ""}
    summary = f"{len(ens)} trees, Z = {z}"
    if not ens.trees:
        summary += " (target unreachable)"
    _emit(args, data, summary)
    return EXIT_OK


def cmd_equiv(args):
    model, condition = _load(args)
    other = None
    if args.other:
        other, _ = io.load_model(args.other)
    rep = certify_equivalence(model, condition, args.max_size, other=other, node_budget=args.node_budget,
                              continuation=_continuation(args))
    data = rep.to_json()
    bad = rep.failing_cells()
    summary = f"verdict: {rep.verdict} ({len(rep.cells)} cells, {len(bad)} failing)"
    if not rep.support_ok:
        summary += f"; support differs: {rep.support_note}"
    _emit(args, data, summary)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_kesten(args):
    model, condition = _load(args)
    root = _root(args, model)
    critical, res = criticalize(model, condition, _continuation(args))
    spec = build_kesten_spec(critical)
    rng = np.random.default_rng(args.seed)
    balls = [sample_kesten_ball(spec, critical, root, args.radius, rng, args.size_cap) for _ in range(args.n)]
    lines = [b.tree.serialize() for b in balls]
    if args.trees:
        with open(args.trees, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    data = {"schema": 1, "kind": "kesten_sample", "model": model.name, "root_type": args.root,
            "radius": args.radius, "seed": args.seed, "r": list(spec.r),
            "resamples": sum(b.resamples for b in balls), "balls": lines if not args.trees else None}
    _emit(args, data, f"{len(lines)} balls of radius {args.radius}; r = {list(spec.r)}")
    return EXIT_OK


def cmd_local_limit(args):
    model, condition = _load(args)
    root = _root(args, model)
    sizes = [int(v) for v in args.sizes.split(",")]
    rep = local_limit_experiment(model, condition, root, args.radius, sizes, args.samples, args.seed,
                                 bootstrap=args.bootstrap)
    lines = []
    for c in rep.cells:
        if c.achievable:
            lines.append(f"k={c.size}: TV={c.tv:.4f} (se {c.stderr:.4f}), attempts {c.attempts}")
        else:
            lines.append(f"k={c.size}: unachievable")
    lines.append(f"trend pass: {rep.trend_pass} (spearman {rep.spearman}, strictly decreasing {rep.strictly_decreasing})")
    _emit(args, rep.to_json(), "\n".join(lines))
    return EXIT_OK if rep.trend_pass else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bgwtilt", description="Criticalize multitype BGW families by exponential tilting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--model", required=True, help="model JSON file")
        if out:
            sp.add_argument("--out", help="write the JSON report here")

    def numeric(sp):
        sp.add_argument("--domain-bound", type=float, default=1e3)
        sp.add_argument("--rho-tol", type=float, default=1e-9,
                        help="target for |rho~ - 1| at the refined crossing")
        sp.add_argument("--allow-escape-failure", action="store_true",
                        help="trace even when the escape condition fails on the grid")

    s = sub.add_parser("check", help="evaluate the structural assumptions")
    common(s)
    s.add_argument("--a3-bound", type=float, default=1e3)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("criticalize", help="find the critical good tilt")
    common(s)
    numeric(s)
    s.add_argument("--trace-out", help="write the continuation trace CSV here")
    s.set_defaults(func=cmd_criticalize)

    s = sub.add_parser("tilt", help="apply tilt parameters and write the tilted model")
    common(s)
    s.add_argument("--tilt", required=True, help="tilt JSON (as written by criticalize)")
    s.set_defaults(func=cmd_tilt)

    s = sub.add_parser("sample", help="sample conditioned trees by rejection")
    common(s)
    numeric(s)
    s.add_argument("--root", type=int, required=True)
    s.add_argument("--g", required=True, help="comma-separated target, one entry per Gamma row")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--max-attempts", type=int, default=200_000_000)
    s.add_argument("--no-criticalize", action="store_true")
    s.add_argument("--trees", help="write serialized trees here, one per line")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("enumerate", help="exact conditioned ensemble")
    common(s)
    s.add_argument("--root", type=int, required=True)
    s.add_argument("--g", required=True)
    s.add_argument("--node-budget", type=int, default=2_000_000)
    s.add_argument("--csv", help="write the ensemble CSV here")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("equiv-test", help="certify equivalence of conditioned laws")
    common(s)
    numeric(s)
    s.add_argument("--other", help="compare against this model instead of the critical tilt")
    s.add_argument("--max-size", type=int, required=True)
    s.add_argument("--node-budget", type=int, default=2_000_000)
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("kesten-sample", help="sample balls of the Kesten-like tree")
    common(s)
    numeric(s)
    s.add_argument("--root", type=int, required=True)
    s.add_argument("--radius", type=int, required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--size-cap", type=int, default=1_000_000)
    s.add_argument("--trees", help="write serialized balls here")
    s.set_defaults(func=cmd_kesten)

    s = sub.add_parser("local-limit", help="TV between conditioned and Kesten balls across sizes")
    common(s)
    s.add_argument("--root", type=int, required=True)
    s.add_argument("--radius", type=int, required=True)
    s.add_argument("--sizes", required=True, help="comma-separated weighted sizes")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--bootstrap", type=int, default=200)
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_local_limit)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except io.ModelFormatError as exc:
        print(f"{getattr(args, 'model', '')}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (CriticalizationError, ConditionedSamplingError, EnumerationBudgetError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NormalizationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
