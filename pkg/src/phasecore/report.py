"""
Report Module
Human-readable tables for the command line.
"""

import logging
import math
from typing import List, Optional, Sequence

from tabulate import tabulate

from .bounds import (
    COUNT_TERM_NOTE,
    BoundParams,
    BoundResult,
    clamp_probability,
    theorem_error_rhs,
)
from .concentration import CheckOutcome
from .harness import SweepSummary, TrialRecord

logger = logging.getLogger(__name__)

TABLE_FORMAT = "github"


def _rule(title: str) -> str:
    return f"{'=' * 70}\n{title}\n{'=' * 70}"


def _exact(value: float) -> str:
    # shortest string that round-trips
    return repr(float(value))


def format_bound(params: BoundParams, result: Optional[BoundResult] = None) -> str:
    """
    Bound evaluation with full-precision values.

    Args:
        params: Evaluated parameters
        result: Probability outputs; None when N is unknown

    Returns:
        Printable text
    """
    rows = [] if params.N is None else [["N", str(params.N)]]
    rows += [
        ["sigma", _exact(params.sigma)],
        ["nu", _exact(params.nu)],
        ["eps", _exact(params.eps)],
        ["delta", _exact(params.delta)],
        ["t", _exact(params.t)],
        ["c", _exact(params.c_bernstein)],
        ["err_rhs", _exact(theorem_error_rhs(params))],
    ]
    notes = []
    if result is None:
        notes.append("note: give N to evaluate the success probability")
    else:
        clamped, flagged = clamp_probability(result.prob_lower)
        rows += [
            ["tail term", _exact(result.tail_term)],
            ["count term", _exact(result.count_term)],
            ["Q", _exact(result.q_term)],
            ["prob_lower (raw)", _exact(result.prob_lower)],
            ["prob_lower (clamped)", _exact(clamped)],
        ]
        if flagged:
            notes.append("note: prob_lower clamped to [0, 1]")
        if result.small_sigma_warning:
            notes.append("warning: sigma > 0.2, Q is only asymptotically valid for small sigma")
        notes.append(f"note: {COUNT_TERM_NOTE}")
    table = tabulate(rows, tablefmt="plain", disable_numparse=True)
    return "\n".join([_rule("Error bound"), table] + notes)


def format_trials(records: Sequence[TrialRecord]) -> str:
    """One line per trial record."""
    rows = [
        [r.trial_id, r.method, r.N, r.I_size, r.err_sq, r.rel_err, r.cert_lhs, r.cert_rhs,
         r.iterations, r.status]
        for r in records
    ]
    headers = ["trial", "method", "N", "|I|", "err_sq", "rel_err", "cert_lhs", "cert_rhs",
               "iter", "status"]
    return tabulate(rows, headers=headers, tablefmt=TABLE_FORMAT, floatfmt=".6g")


def format_summary(summary: SweepSummary) -> str:
    """Per-point medians with the theorem column and fitted slopes."""
    table = tabulate(
        summary.table, headers="keys", tablefmt=TABLE_FORMAT, floatfmt=".6g", showindex=False
    )
    slopes = [
        f"slope[{method}] = {'n/a' if math.isnan(value) else format(value, '.4f')}"
        for method, value in summary.slopes.items()
    ]
    return "\n".join([_rule("Sweep summary (err_sq / |x0|^4)"), table, ""] + slopes)


def format_checks(outcomes: Sequence[CheckOutcome]) -> str:
    """Empirical value against bound for every check, with the pass flag."""
    rows: List[list] = []
    for o in outcomes:
        bound = f"{o.bound:.6g}" + (" (clamped)" if o.clamped else "")
        rows.append([o.name, o.kind, o.trials, o.empirical, bound, o.tolerance,
                     "PASS" if o.passed else "FAIL"])
    headers = ["check", "kind", "trials", "empirical", "bound", "slack", "result"]
    return "\n".join([
        _rule("Validation"),
        tabulate(rows, headers=headers, tablefmt=TABLE_FORMAT, floatfmt=".6g"),
    ])
