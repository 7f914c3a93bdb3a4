"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
The default seed is read from ``HYBRIDSHRINK_SEED`` (else 0).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import warnings
from dataclasses import replace

from . import __version__
from .calibration import DEFAULT_A, DEFAULT_B, fit_marginal_mle, fit_method_of_moments
from .checks import CoverageTarget, Statistic, replication_evaluation, tail_area_check
from .errors import HybridShrinkError, InfeasibleSelectionError, InvalidInputError, NumericalError
from .estimators import estimate_corpus
from .fileio import (
    format_artifact, format_estimates, parse_corpus, read_artifact, read_corpus, read_text,
    read_unit_level, sha256_hex, write_text,
)
from .model import ALL_METHODS, HyperParams, Method, face_value_estimate
from .report import OrderingCheck, figure1_report
from .rng import SEED_ENV_VAR, check_seed, default_seed
from .selection import DRAW_CAP, Direction, SelectionRule
from .simlab import DEFAULT_SWEEPS, ScenarioConfig, ScenarioKind, independence_check, sweep_point

def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except (ValueError, InvalidInputError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p, hp=True):
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"random seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    if hp:
        g = p.add_argument_group("prior")
        g.add_argument("--calibration", help="calibration artifact written by 'calibrate'")
        g.add_argument("--m0", type=float)
        g.add_argument("--tau", type=float)
        g.add_argument("--a", type=float, default=None, help=f"default {DEFAULT_A:g}")
        g.add_argument("--b", type=float, default=None, help=f"default {DEFAULT_B:g}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridshrink", description="Selection-aware shrinkage estimates for experiment corpora."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="posterior estimates for every experiment")
    p.add_argument("input", help="corpus CSV (or unit-level CSV with --unit-level)")
    p.add_argument("--unit-level", action="store_true",
                   help="input is long-format experiment_id,unit_id,z,y")
    p.add_argument("--method", default="hybrid", choices=[m.value for m in ALL_METHODS])
    p.add_argument("--level", type=float, default=0.90)
    _add_common(p)

    p = sub.add_parser("calibrate", help="fit m0 and tau from a corpus")
    p.add_argument("input")
    p.add_argument("--method", default="mle", choices=["moments", "mle"])
    p.add_argument("--a", type=float, default=DEFAULT_A)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--selected-only-ack", action="store_true",
                   help="allow fitting when every experiment in the corpus was selected")
    p.add_argument("-o", "--output", help="artifact path (default: stdout)")

    p = sub.add_parser("check", help="posterior predictive tail areas")
    p.add_argument("input")
    p.add_argument("--method", default="hybrid", choices=[m.value for m in ALL_METHODS])
    p.add_argument("--statistic", default="identity", choices=[s.value for s in Statistic])
    p.add_argument("--draws", type=int, default=4000)
    p.add_argument("--level", type=float, default=0.90)
    _add_common(p)

    p = sub.add_parser("evaluate", help="MAE and coverage against paired replications")
    p.add_argument("input", help="corpus CSV with replication_theta_hat")
    p.add_argument("--method", action="append", choices=[m.value for m in ALL_METHODS],
                   help="repeatable; default all three")
    p.add_argument("--coverage-target", default="point", choices=[c.value for c in CoverageTarget])
    p.add_argument("--level", type=float, default=0.90)
    _add_common(p)

    p = sub.add_parser("simulate", help="misspecification sweeps with a metric report")
    p.add_argument("--kind", action="append", choices=[k.value for k in ScenarioKind],
                   help="repeatable; default all three")
    p.add_argument("--mu", type=_float_list, help="absolute mu values (default 0,0.5,...,2 x epsilon)")
    p.add_argument("--nu", type=_float_list)
    p.add_argument("--rho", type=_float_list)
    p.add_argument("--n-selected", type=int, default=20_000)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--sigma-hat", type=float, default=1.25)
    p.add_argument("--threshold", type=float, default=1.645)
    p.add_argument("--null-value", type=float, default=1.0)
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--draw-cap", type=int, default=DRAW_CAP,
                   help="candidate draws per sweep point before giving up")
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"random seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("--output-dir", required=True)
    return parser


def _hyperparams(args, required=True) -> HyperParams | None:
    if args.calibration:
        if args.m0 is not None or args.tau is not None:
            raise InvalidInputError("give either --calibration or --m0/--tau, not both")
        report, _ = read_artifact(args.calibration)
        hp = report.hyperparams
        if args.a is not None or args.b is not None:
            hp = replace(hp, a=args.a if args.a is not None else hp.a,
                         b=args.b if args.b is not None else hp.b)
        return hp
    if args.m0 is None or args.tau is None:
        if required:
            raise InvalidInputError("hyperparameters needed: pass --calibration or both --m0 and --tau")
        return None
    return HyperParams(args.m0, args.tau,
                       DEFAULT_A if args.a is None else args.a,
                       DEFAULT_B if args.b is None else args.b)


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    write_text(path, text)


def _seed_of(args) -> int:
    return default_seed() if args.seed is None else args.seed


def cmd_estimate(args) -> int:
    if args.unit_level:
        units = read_unit_level(args.input)
        corpus = [face_value_estimate(d, eid) for eid, d in units.items()]
        bad = [e.id for e in corpus if not e.sigma_hat > 0]
        if bad:
            raise InvalidInputError(f"experiment {bad[0]!r}: standard error is zero")
    else:
        corpus = read_corpus(args.input)
    method = Method.parse(args.method)
    hp = _hyperparams(args, required=method is not Method.FACE_VALUE)
    _emit(format_estimates(estimate_corpus(corpus, hp, method, args.level)), args.output)
    return 0


def cmd_calibrate(args) -> int:
    text = read_text(args.input)
    corpus = parse_corpus(text)
    pre_selection = [e for e in corpus if not e.selected]
    if not pre_selection and not args.selected_only_ack:
        raise InvalidInputError(
            "every experiment in the corpus is marked selected; a prior fitted to launched "
            "experiments only carries the selection effect into the estimates. Supply the "
            "pre-selection population, or pass --selected-only-ack to fit anyway."
        )
    fit = fit_method_of_moments if args.method == "moments" else fit_marginal_mle
    report = fit(corpus, args.a, args.b)
    if args.method == "mle":
        floor = None
        if args.a > 2:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                floor = fit_method_of_moments(corpus, args.a, args.b)
        if floor is not None and report.log_marginal_likelihood < floor.log_marginal_likelihood:
            raise NumericalError("marginal MLE scored below the moment fit")
    _emit(format_artifact(report, sha256_hex(text)), args.output)
    return 0


def cmd_check(args) -> int:
    corpus = read_corpus(args.input)
    hp = _hyperparams(args)
    seed = _seed_of(args)
    posts = estimate_corpus(corpus, hp, args.method, args.level)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "method", "statistic", "observed", "tail_area", "draws", "seed"])
    for i, (e, post) in enumerate(zip(corpus, posts)):
        res = tail_area_check(e, post, args.statistic, args.draws, seed, hp.m0, stream=(i,))
        w.writerow([e.id, args.method, res.statistic_name, repr(res.observed),
                    repr(res.tail_area), args.draws, seed])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_evaluate(args) -> int:
    corpus = read_corpus(args.input)
    methods = [Method.parse(m) for m in (args.method or [m.value for m in ALL_METHODS])]
    needs_hp = any(m is not Method.FACE_VALUE for m in methods)
    hp = _hyperparams(args, required=needs_hp)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "mae", "coverage", "n_pairs", "coverage_target", "level"])
    for m in methods:
        res = replication_evaluation(corpus, estimate_corpus(corpus, hp, m, args.level),
                                     args.coverage_target)
        w.writerow([m.value, repr(res.mae), repr(res.coverage), res.n_pairs,
                    args.coverage_target, repr(args.level)])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_simulate(args) -> int:
    seed = _seed_of(args)
    kinds = [ScenarioKind(k) for k in (args.kind or [k.value for k in ScenarioKind])]
    rule = SelectionRule(threshold=args.threshold, null_value=args.null_value,
                         direction=Direction.TWO_SIDED if args.two_sided else Direction.GREATER)
    rows, extra = [], []
    for kind in kinds:
        base = ScenarioConfig(kind=kind, epsilon=args.epsilon, n_experiments=args.n_selected,
                              sigma_hat=args.sigma_hat, rule=rule, seed=seed,
                              draw_cap=args.draw_cap)
        given = getattr(args, kind.sweep_variable)
        if given is None:
            values = list(DEFAULT_SWEEPS[kind])
            if kind is ScenarioKind.MISSPECIFIED_MEAN:
                values = [base.hp.m0 + v * args.epsilon for v in values]
        else:
            values = given
        for i, v in enumerate(values):
            try:
                rows += sweep_point(base, v, i, ALL_METHODS, args.level)
            except InfeasibleSelectionError as exc:
                raise InfeasibleSelectionError(
                    f"{kind.value} at {kind.sweep_variable}={v:g}: {exc}") from None
        if kind is ScenarioKind.HIDDEN_SELECTION and 0.0 in values:
            stat, p, ok = independence_check(base)
            extra.append(OrderingCheck(
                "independence at rho=0", ok, f"KS statistic {stat:.4f}, p = {p:.3f}"))
    text = figure1_report(rows, args.output_dir, extra, plot=not args.no_plot)
    sys.stdout.write(text)
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "calibrate": cmd_calibrate,
    "check": cmd_check,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except HybridShrinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
