"""
CLI Module
Command-line entry point: bound, trial, sweep, certify and validate.

Exit codes: 0 success, 1 usage or configuration error, 2 validation
failure, 3 solver error.
"""

import argparse
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .bounds import BoundParams, theorem_prob_lower
from .concentration import (
    order_stat_check,
    subcolumn_gaussianity_check,
    weak_energy_check,
    wishart_check,
)
from .config import load_config, setup_logging
from .csv_exporter import CsvExporter
from .errors import ConfigError, ContractViolation, ConvergenceError, PhasecoreError
from .estimators import METHODS
from .harness import ExperimentConfig, IndexRule, certificate_violations, run_sweep
from .linalg import RngStream
from .report import format_bound, format_checks, format_summary, format_trials

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

CHECKS = ("order_stats", "weak_energy", "wishart", "subcolumn")
# validators draw from disjoint stream ranges of the master seed
CHECK_STREAM_BASE = {name: i << 32 for i, name in enumerate(CHECKS)}
INDEX_KEYS = ("I_size", "sigma", "nu")
FLAG_KEYS = ("seed", "n", "N", "I_size", "sigma", "nu", "eps", "delta", "t", "c", "trials",
             "methods")


class UsageError(PhasecoreError):
    """Invalid command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    common = _Parser(add_help=False)
    common.add_argument('--config', help='User YAML file overriding packaged defaults')
    common.add_argument('--seed', type=int, help='Master seed (64-bit unsigned)')
    common.add_argument('--n', type=int, help='Signal dimension')
    common.add_argument(
        '--N', type=int, nargs='+', help='Number of measurements (several for sweep)'
    )
    common.add_argument('--I-size', dest='I_size', type=int, help='Weak set size |I|')
    common.add_argument('--sigma', type=float, help='Weak fraction |I|/N')
    common.add_argument('--nu', type=float, help='Aspect ratio n/|I|')
    common.add_argument('--eps', type=float, help='Count slack epsilon in (0, 1)')
    common.add_argument('--delta', type=float, help='Threshold slack delta > 0')
    common.add_argument('--t', type=float, help='Deviation t in (0, nu^-1/2 - 1)')
    common.add_argument('--c', type=float, help='Bernstein constant c > 0')
    common.add_argument('--trials', type=int, help='Number of trials')
    common.add_argument('--methods', nargs='+', choices=METHODS, help='Estimators to run')
    common.add_argument('--out', help='Output directory for CSV files')
    common.add_argument('--workers', type=int, help='Worker processes (default: CPU count)')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable DEBUG logging')

    parser = _Parser(
        prog='phasecore',
        description='Null-vector and spectral-vector phase retrieval experiments',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s bound --sigma 0.1 --nu 0.5 --eps 0.5 --delta 1 --t 0.1
  %(prog)s trial --n 32 --N 2048 --I-size 256
  %(prog)s sweep --n 64 --nu 0.5 --N 512 1024 2048 4096 --trials 50
  %(prog)s certify --trials 100
  %(prog)s validate --checks order_stats wishart
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    sub.add_parser('bound', parents=[common], help='Evaluate the error bound and its probability')
    sub.add_parser('trial', parents=[common], help='Run trials at one point')
    sub.add_parser('sweep', parents=[common], help='Run a sweep over N and summarize')
    sub.add_parser('certify', parents=[common], help='Check the per-instance certificate')
    validate = sub.add_parser('validate', parents=[common], help='Run concentration validators')
    validate.add_argument('--checks', nargs='+', choices=CHECKS, help='Validators to run')
    return parser.parse_args(argv)


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {}
    for key in FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides


def resolve_settings(section: Dict[str, Any], overrides: Dict[str, Any],
                     index_exclusive: bool = True) -> Dict[str, Any]:
    """
    Apply flag overrides to a config section.

    A flag choosing |I| (--I-size, --sigma, --nu) removes the other choices
    inherited from configuration. Without index_exclusive, --sigma and --nu
    may be given together but neither may accompany --I-size.
    """
    given = [k for k in INDEX_KEYS if k in overrides]
    if index_exclusive and len(given) > 1:
        raise UsageError(f"Give only one of --I-size, --sigma, --nu (got {', '.join(given)})")
    if "I_size" in given and len(given) > 1:
        raise UsageError(f"--I-size cannot be combined with --sigma or --nu "
                         f"(got {', '.join(given)})")

    settings = {k: v for k, v in section.items() if not isinstance(v, dict)}
    if given:
        dropped = INDEX_KEYS if index_exclusive or "I_size" in given else ("I_size",)
        for key in dropped:
            settings.pop(key, None)
    settings.update(overrides)
    return settings


def _require(settings: Dict[str, Any], keys: Sequence[str]) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise UsageError(f"Missing required fields: {', '.join(missing)}")


def _single_N(settings: Dict[str, Any]) -> int:
    N = settings["N"]
    if isinstance(N, (list, tuple)):
        if len(N) != 1:
            raise UsageError(f"Expected a single --N value, got {list(N)}")
        N = N[0]
    return int(N)


def _index_rule(settings: Dict[str, Any]) -> IndexRule:
    given = [k for k in INDEX_KEYS if settings.get(k) is not None]
    if not given:
        # median split, |I| = ceil(N/2)
        return IndexRule("fraction", 0.5)
    if len(given) > 1:
        raise UsageError("At most one of I_size, sigma, nu may be set")
    key = given[0]
    kind = {"I_size": "fixed", "sigma": "fraction", "nu": "nu_fixed"}[key]
    return IndexRule(kind, float(settings[key]))


def _check_trials(settings: Dict[str, Any]) -> int:
    trials = int(settings["trials"])
    if trials < 1:
        raise UsageError(f"trials must be at least 1, got {trials}")
    return trials


def _workers(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    workers = args.workers
    if workers is None:
        workers = config.get('output', {}).get('workers')
    if workers is None:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise UsageError(f"workers must be at least 1, got {workers}")
    return int(workers)


def _metadata(command: str, settings: Dict[str, Any]) -> Dict[str, Any]:
    return {"command": command, "seed": settings.get("seed"), "config": settings}


def _experiment(settings: Dict[str, Any], config: Dict[str, Any], N_list: List[int],
                methods: Sequence[str]) -> ExperimentConfig:
    return ExperimentConfig(
        master_seed=int(settings["seed"]),
        n=int(settings["n"]),
        N_list=tuple(int(N) for N in N_list),
        I_size_rule=_index_rule(settings),
        methods=tuple(methods),
        trials_per_point=_check_trials(settings),
        eps=settings.get("eps"),
        delta=settings.get("delta"),
        t=settings.get("t"),
        c_bernstein=float(settings.get("c", 1.0)),
        include_timing=bool(config.get('output', {}).get('include_timing', False)),
    )


def cmd_bound(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """Evaluate the error bound and, when N is known, its success probability."""
    settings = resolve_settings(config.get('bound', {}), _flag_overrides(args),
                                index_exclusive=False)
    missing = [k for k in ("eps", "delta", "t") if settings.get(k) is None]
    if settings.get("I_size") is not None:
        missing += [k for k in ("n", "N") if settings.get(k) is None]
    else:
        missing += [k for k in ("sigma", "nu") if settings.get(k) is None]
    if missing:
        raise UsageError(f"Missing required fields: {', '.join(missing)}")

    c = float(settings.get("c", 1.0))
    N = None if settings.get("N") is None else _single_N(settings)
    if settings.get("I_size") is not None:
        params = BoundParams.from_sizes(
            int(settings["n"]), N, int(settings["I_size"]), float(settings["eps"]),
            float(settings["delta"]), float(settings["t"]), c
        )
    else:
        params = BoundParams(
            sigma=float(settings["sigma"]), nu=float(settings["nu"]), eps=float(settings["eps"]),
            delta=float(settings["delta"]), t=float(settings["t"]), c_bernstein=c, N=N
        )

    result = None if params.N is None else theorem_prob_lower(params)
    print(format_bound(params, result))
    if args.out:
        CsvExporter(args.out, config).write_bound(
            params, result, metadata=_metadata("bound", settings)
        )
    return EXIT_OK


def cmd_trial(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """Run consecutive trials at one point."""
    settings = resolve_settings(config.get('trial', {}), _flag_overrides(args))
    _require(settings, ("seed", "n", "N", "trials"))
    methods = settings.get("methods") or list(METHODS)
    cfg = _experiment(settings, config, [_single_N(settings)], methods)

    records, _ = run_sweep(cfg, workers=_workers(args, config))
    print(format_trials(records))
    if args.out:
        CsvExporter(args.out, config).write_trials(records, metadata=_metadata("trial", settings))

    failed = [r for r in records if not r.ok]
    if failed:
        logger.error(f"{len(failed)} of {len(records)} trial runs failed")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """Run the sweep, write trials.csv and summary.csv, print the summary."""
    settings = resolve_settings(config.get('sweep', {}), _flag_overrides(args))
    _require(settings, ("seed", "n", "N", "trials"))
    N = settings["N"]
    N_list = list(N) if isinstance(N, (list, tuple)) else [N]
    methods = settings.get("methods") or list(METHODS)
    cfg = _experiment(settings, config, N_list, methods)

    out = args.out or config.get('output', {}).get('out', 'output')
    exporter = CsvExporter(out, config)
    records, summary = run_sweep(cfg, workers=_workers(args, config))

    meta = _metadata("sweep", settings)
    exporter.write_trials(records, metadata=meta)
    exporter.write_summary(summary, metadata=meta)
    print(format_summary(summary))
    return EXIT_OK


def cmd_certify(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """Check the certificate over the configured number of null-vector instances."""
    settings = resolve_settings(config.get('certify', {}), _flag_overrides(args))
    _require(settings, ("seed", "n", "N", "trials"))
    cfg = _experiment(settings, config, [_single_N(settings)], ["null"])

    records, _ = run_sweep(cfg, workers=_workers(args, config))
    if args.out:
        CsvExporter(args.out, config).write_trials(
            records, filename="certify.csv", metadata=_metadata("certify", settings)
        )

    failed = [r for r in records if not r.ok]
    violations = certificate_violations(records)
    checked = len(records) - len(failed)
    print(f"certificate holds in {checked - len(violations)}/{checked} instances")
    if violations:
        print(format_trials(violations))
        return EXIT_VALIDATION
    if failed:
        logger.error(f"{len(failed)} instances failed in the solver")
        return EXIT_SOLVER
    return EXIT_OK


def _check_sizes(settings: Dict[str, Any]) -> int:
    if settings.get("I_size") is not None:
        return int(settings["I_size"])
    _require(settings, ("N", "sigma"))
    return int(math.ceil(float(settings["sigma"]) * _single_N(settings)))


def run_check(name: str, settings: Dict[str, Any], seed: int, workers: int) -> List[Any]:
    """
    Run one validator and return its outcome rows.

    Args:
        name: One of CHECKS
        settings: Resolved parameters of the check
        seed: Master seed
        workers: Worker processes

    Returns:
        List of CheckOutcome
    """
    rng = RngStream(seed, CHECK_STREAM_BASE[name])
    trials = _check_trials(settings)
    if name == "order_stats":
        _require(settings, ("n", "N", "delta", "eps"))
        report = order_stat_check(
            rng, int(settings["n"]), _single_N(settings), _check_sizes(settings),
            float(settings["delta"]), float(settings["eps"]), trials, workers
        )
    elif name == "weak_energy":
        _require(settings, ("n", "N", "eps", "delta", "t"))
        report = weak_energy_check(
            rng, int(settings["n"]), _single_N(settings), _check_sizes(settings),
            float(settings["eps"]), float(settings["delta"]), float(settings["t"]), trials,
            float(settings.get("c", 1.0)), workers
        )
    elif name == "wishart":
        _require(settings, ("n", "I_size", "t"))
        report = wishart_check(
            rng, int(settings["n"]), int(settings["I_size"]), float(settings["t"]), trials,
            workers
        )
    else:
        _require(settings, ("n", "N", "I_size"))
        report = subcolumn_gaussianity_check(
            rng, int(settings["n"]), _single_N(settings), int(settings["I_size"]), trials,
            workers
        )
    return report.outcomes()


def cmd_validate(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """Run the selected validators; exit 2 when any comparison fails."""
    section = config.get('validate', {})
    overrides = _flag_overrides(args)
    seed = int(overrides.get("seed", section.get("seed", 0)))
    checks = args.checks or section.get("checks") or list(CHECKS)
    workers = _workers(args, config)

    # flags apply to every selected check
    if "trials" in overrides and overrides["trials"] < 1:
        raise UsageError(f"trials must be at least 1, got {overrides['trials']}")
    per_check = {}
    for name in checks:
        if name not in CHECKS:
            raise UsageError(f"Unknown check '{name}', expected one of {CHECKS}")
        per_check[name] = resolve_settings(section.get(name, {}), overrides)
        _check_trials(per_check[name])

    outcomes = []
    for name in checks:
        logger.info(f"Running check: {name}")
        outcomes.extend(run_check(name, per_check[name], seed, workers))

    print(format_checks(outcomes))
    out = args.out or config.get('output', {}).get('out', 'output')
    CsvExporter(out, config).write_checks(
        outcomes, metadata={"command": "validate", "seed": seed, "config": per_check}
    )

    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        logger.error(f"Validation failed: {', '.join(failed)}")
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {
    "bound": cmd_bound,
    "trial": cmd_trial,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main execution function."""
    try:
        args = parse_arguments(argv)
        config = load_config(args.config)
        setup_logging(config, args.verbose)
        logger.debug(f"Running {args.command}")
        return COMMANDS[args.command](args, config)

    except (UsageError, ConfigError, ContractViolation) as e:
        logger.error(str(e))
        print(f"phasecore: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    except OSError as e:
        logger.error(f"Output error: {str(e)}")
        print(f"phasecore: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    except ConvergenceError as e:
        logger.error(f"Solver error: {str(e)}", exc_info=True)
        return EXIT_SOLVER

    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return 130

    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}", exc_info=True)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
