"""Command-line front end.

Subcommands: bound (closed-form risk bound), mse-curve (run a config
file), packing (random packing construction + desiderata check),
instance-bound (certified instance-specific bound search),
check-conditions (dimension/radius prerequisites).

Exit codes: 0 ok, 2 usage or config error, 3 infeasible packing,
4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys

import numpy as np

from .bounds import (
    PackingInfeasibleError,
    build_packing,
    instance_bound_search,
    minimax_lower_bound,
    sparse_recovery_condition,
    verify_packing_desiderata,
)
from .core import (
    Ensemble,
    ProblemConfig,
    SupportCodec,
    make_dirac_hadamard_dictionary,
    make_identity_dictionary,
)
from .expconfig import ConfigError, parse_config
from .experiment import emit_csv, emit_plot_svg, run_mse_curve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _print_rows(pairs):
    for key, value in pairs:
        if isinstance(value, bool):
            value = "true" if value else "false"
        print(f"{key} {value}")


def _snr_from_db(snr_db: float) -> tuple[float, float]:
    """(sigma_a, sigma) pair realizing the given SNR in dB with sigma=1."""
    return 10.0 ** (snr_db / 20.0), 1.0


def _reference_for(parser: argparse.ArgumentParser, m: int, p: int):
    if p == m:
        return make_identity_dictionary(m)
    if p == 2 * m and (m & (m - 1)) == 0:
        return make_dirac_hadamard_dictionary(m)
    parser.error(f"no built-in reference for m={m}, p={p} "
                 f"(need p == m or p == 2m with m a power of two)")


def _ensemble_hash(ensemble: Ensemble) -> str:
    digest = hashlib.sha256()
    for member in ensemble.members:
        digest.update(np.ascontiguousarray(member.entries).tobytes())
    return digest.hexdigest()[:16]


def _cmd_bound(parser, args) -> int:
    if args.n < 1:
        parser.error(f"--n must be >= 1, got {args.n}")
    if args.r <= 0:
        parser.error(f"--r must be > 0, got {args.r}")
    sigma_a, sigma = _snr_from_db(args.snr_db)
    config = ProblemConfig(m=args.m, p=args.p, s=args.s, sigma_a=sigma_a,
                           sigma=sigma, r=args.r, n_samples=args.n)
    report = minimax_lower_bound(config)
    pairs = [
        ("value", repr(report.value)),
        ("branch", report.branch),
        ("conditions_met", report.conditions_met),
    ]
    pairs += [(f"condition.{key}", value)
              for key, value in report.condition_details.items()]
    _print_rows(pairs)
    return EXIT_OK


def _cmd_check_conditions(parser, args) -> int:
    sigma_a, sigma = _snr_from_db(0.0)
    r = args.r if args.r is not None else 1.0 / math.sqrt(args.p)
    config = ProblemConfig(m=args.m, p=args.p, s=args.s, sigma_a=sigma_a,
                           sigma=sigma, r=r, n_samples=1)
    report = minimax_lower_bound(config)
    cs_ok = sparse_recovery_condition(config, args.c0)
    pairs = [
        ("sparse_recovery_ok", cs_ok),
        ("sparse_recovery_threshold", repr(args.c0 * args.s * math.log(args.p / args.s))),
    ]
    pairs += [(f"condition.{key}", value)
              for key, value in report.condition_details.items()]
    pairs.append(("conditions_met", report.conditions_met))
    _print_rows(pairs)
    return EXIT_OK


def _cmd_packing(parser, args) -> int:
    reference = _reference_for(parser, args.m, args.p)
    rng = np.random.default_rng(args.seed)
    try:
        ensemble = build_packing(reference, args.r, args.epsilon, args.size,
                                 args.attempts, rng)
    except PackingInfeasibleError as exc:
        _print_rows([
            ("status", "infeasible"),
            ("reason", str(exc)),
            ("partial_size", exc.partial_size),
            ("attempts", exc.attempts),
        ])
        return EXIT_INFEASIBLE
    config = ProblemConfig(m=args.m, p=args.p, s=args.s, sigma_a=args.sigma_a,
                           sigma=args.sigma, r=args.r, reference=reference,
                           n_samples=args.n_samples)
    codec = SupportCodec(args.p, args.s)
    report = verify_packing_desiderata(ensemble, config, args.epsilon, codec,
                                       rng=rng)
    _print_rows([
        ("status", "ok"),
        ("size", ensemble.size),
        ("separation", repr(ensemble.separation)),
        ("separation_required", repr(report.separation_required)),
        ("separation_margin", repr(report.separation_margin)),
        ("mi_upper_bound_nats", repr(report.mi_report.upper_bound_nats)),
        ("eta", repr(report.eta)),
        ("mi_margin", repr(report.mi_margin)),
        ("desiderata_ok", report.passed),
        ("ensemble_hash", _ensemble_hash(ensemble)),
    ])
    return EXIT_OK


def _cmd_instance_bound(parser, args) -> int:
    reference = _reference_for(parser, args.m, args.p)
    config = ProblemConfig(m=args.m, p=args.p, s=args.s, sigma_a=args.sigma_a,
                           sigma=args.sigma, r=args.r, reference=reference,
                           n_samples=args.n_samples)
    rng = np.random.default_rng(args.seed)
    result = instance_bound_search(config, args.size, args.attempts, rng)
    pairs = [
        ("certified", result.certified),
        ("epsilon", repr(result.epsilon)),
        ("threshold", repr(result.threshold)),
        ("evaluations", result.evaluations),
        ("diagnostics", result.diagnostics),
    ]
    if result.ensemble is not None:
        pairs += [
            ("separation", repr(result.ensemble.separation)),
            ("mi_upper_bound_nats", repr(result.mi_report.upper_bound_nats)),
            ("ensemble_hash", _ensemble_hash(result.ensemble)),
        ]
    _print_rows(pairs)
    return EXIT_OK


def _cmd_mse_curve(parser, args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    config = parse_config(text)
    rows = run_mse_curve(config)
    emit_csv(rows, config.csv_path)
    print(f"csv {config.csv_path}")
    if config.svg_path is not None:
        emit_plot_svg(rows, config.svg_path)
        print(f"svg {config.svg_path}")
    for n in config.n_grid:
        agg = next(r for r in rows if r.is_aggregate and r.n_samples == n)
        print(f"mean_mse N={n} {agg.mse!r} +/- {agg.mse_std_error!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dictminimax",
        description="Minimax-risk workbench for dictionary learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bound = sub.add_parser("bound", help="evaluate the closed-form risk lower bound")
    bound.add_argument("--m", type=int, required=True)
    bound.add_argument("--p", type=int, required=True)
    bound.add_argument("--s", type=int, required=True)
    bound.add_argument("--snr-db", type=float, required=True)
    bound.add_argument("--n", type=int, required=True, help="sample size N")
    bound.add_argument("--r", type=float, required=True, help="ball radius")
    bound.set_defaults(func=_cmd_bound)

    curve = sub.add_parser("mse-curve", help="run an MSE-vs-N experiment config")
    curve.add_argument("config", help="path to a key = value config file")
    curve.set_defaults(func=_cmd_mse_curve)

    packing = sub.add_parser("packing", help="build a separated ensemble by rejection sampling")
    packing.add_argument("--m", type=int, required=True)
    packing.add_argument("--p", type=int, required=True)
    packing.add_argument("--r", type=float, required=True)
    packing.add_argument("--epsilon", type=float, required=True)
    packing.add_argument("--size", "--L", dest="size", type=int, required=True,
                         help="ensemble cardinality")
    packing.add_argument("--attempts", type=int, default=100_000)
    packing.add_argument("--seed", type=int, default=0)
    packing.add_argument("--s", type=int, default=1)
    packing.add_argument("--sigma-a", type=float, default=1.0)
    packing.add_argument("--sigma", type=float, default=0.1)
    packing.add_argument("--n-samples", type=int, default=100)
    packing.set_defaults(func=_cmd_packing)

    instance = sub.add_parser("instance-bound",
                              help="bisect for a certified instance-specific bound")
    instance.add_argument("--m", type=int, required=True)
    instance.add_argument("--p", type=int, required=True)
    instance.add_argument("--s", type=int, required=True)
    instance.add_argument("--sigma-a", type=float, default=1.0)
    instance.add_argument("--sigma", type=float, default=0.1)
    instance.add_argument("--n-samples", type=int, default=100)
    instance.add_argument("--r", type=float, required=True)
    instance.add_argument("--size", "--L", dest="size", type=int, required=True)
    instance.add_argument("--attempts", type=int, default=2_000)
    instance.add_argument("--seed", type=int, default=0)
    instance.set_defaults(func=_cmd_instance_bound)

    conditions = sub.add_parser("check-conditions",
                                help="check dimension/radius prerequisites")
    conditions.add_argument("--m", type=int, required=True)
    conditions.add_argument("--p", type=int, required=True)
    conditions.add_argument("--s", type=int, required=True)
    conditions.add_argument("--c0", type=float, default=1.0)
    conditions.add_argument("--r", type=float, default=None)
    conditions.set_defaults(func=_cmd_check_conditions)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(parser, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
