"""
Harness Module
Seeded Monte Carlo runner: single trials, parameter sweeps and their
aggregation into a per-point summary with a log-log decay slope.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .bounds import BoundParams, theorem_error_rhs
from .errors import ContractViolation, ParameterError, PhasecoreError
from .estimators import (
    METHODS,
    certify_estimate,
    make_ensemble,
    null_vector,
    select_weak,
    spectral_vector,
)
from .linalg import DENSE_MAX, RngStream

logger = logging.getLogger(__name__)

RULE_KINDS = ("fixed", "fraction", "nu_fixed")
SUMMARY_COLUMNS = [
    "N", "I_size", "sigma", "nu", "method", "trials", "failed",
    "median", "mean", "p90", "theorem_rhs",
]


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int = 1) -> List[Any]:
    """
    Map fn over items, in a process pool when workers > 1.

    Results come back in input order whatever the scheduling.

    Args:
        fn: Picklable top-level function
        items: Work items
        workers: Number of worker processes

    Returns:
        List of results in input order
    """
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


@dataclass(frozen=True)
class IndexRule:
    """How |I| is derived from (n, N): fixed size, fraction σ of N, or fixed ν = n/|I|."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ContractViolation(
                f"Unknown index rule '{self.kind}', expected one of {RULE_KINDS}"
            )
        if not self.value > 0:
            raise ContractViolation(f"Index rule value must be positive, got {self.value!r}")

    def resolve(self, n: int, N: int) -> int:
        if self.kind == "fixed":
            size = int(self.value)
        elif self.kind == "fraction":
            size = int(math.ceil(self.value * N))
        else:
            size = int(math.ceil(n / self.value))
        if not n < size < N:
            raise ContractViolation(
                f"Index rule {self.kind}({self.value}) gives I_size={size}, need {n} < I_size < {N}"
            )
        return size


@dataclass(frozen=True)
class SweepPoint:
    index: int
    n: int
    N: int
    I_size: int

    @property
    def sigma(self) -> float:
        return self.I_size / self.N

    @property
    def nu(self) -> float:
        return self.n / self.I_size


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A sweep over N at fixed n.

    The bound fields feed the theorem column of the summary; the timing flag
    controls whether wall_time_ms is measured.
    """

    master_seed: int
    n: int
    N_list: Tuple[int, ...]
    I_size_rule: IndexRule
    methods: Tuple[str, ...] = METHODS
    trials_per_point: int = 1
    eps: Optional[float] = None
    delta: Optional[float] = None
    t: Optional[float] = None
    c_bernstein: float = 1.0
    x0_mode: str = "random_unit"
    x0: Optional[Tuple[complex, ...]] = None
    dense_max: int = DENSE_MAX
    include_timing: bool = False

    def __post_init__(self):
        RngStream(self.master_seed)
        if not self.N_list:
            raise ContractViolation("Experiment has no N values")
        if not self.methods:
            raise ContractViolation("Experiment has no methods")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ContractViolation(f"Unknown methods {unknown}, expected a subset of {METHODS}")
        if self.trials_per_point < 1:
            raise ContractViolation(f"trials must be at least 1, got {self.trials_per_point}")
        self.points()

    def points(self) -> List[SweepPoint]:
        return [
            SweepPoint(index=i, n=self.n, N=int(N), I_size=self.I_size_rule.resolve(self.n, int(N)))
            for i, N in enumerate(self.N_list)
        ]

    def bound_params(self, point: SweepPoint) -> Optional[BoundParams]:
        if self.eps is None or self.delta is None or self.t is None:
            return None
        return BoundParams.from_sizes(
            point.n, point.N, point.I_size, self.eps, self.delta, self.t, self.c_bernstein
        )


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    seed_stream: int
    n: int
    N: int
    I_size: int
    sigma: float
    nu: float
    method: str
    err_sq: float
    rel_err: float
    align_inner: float
    cert_lhs: float
    cert_rhs: float
    iterations: int
    wall_time_ms: float
    status: str
    x0_norm: float

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SweepSummary:
    """Per (point, method) statistics of err_sq/‖x0‖⁴ and per-method slopes."""

    table: pd.DataFrame
    slopes: Dict[str, float] = field(default_factory=dict)


def _failed_record(point: SweepPoint, trial_id: int, method: str, error: Exception,
                   x0_norm: float) -> TrialRecord:
    return TrialRecord(
        trial_id=trial_id, seed_stream=trial_id, n=point.n, N=point.N, I_size=point.I_size,
        sigma=point.sigma, nu=point.nu, method=method, err_sq=math.nan, rel_err=math.nan,
        align_inner=math.nan, cert_lhs=math.nan, cert_rhs=math.nan, iterations=-1,
        wall_time_ms=math.nan, status=type(error).__name__, x0_norm=x0_norm
    )


def run_trial(
    point: SweepPoint,
    trial_id: int,
    master_seed: int,
    methods: Sequence[str] = METHODS,
    x0_mode: str = "random_unit",
    x0: Optional[Sequence[complex]] = None,
    dense_max: int = DENSE_MAX,
    include_timing: bool = False
) -> List[TrialRecord]:
    """
    Run every requested method on the ensemble of stream (master_seed, trial_id).

    Solver failures become records with NaN metrics and the error class as
    status; the trial is not retried.

    Args:
        point: Problem sizes
        trial_id: Global trial id, also the stream id
        master_seed: Master seed
        methods: Subset of ('null', 'spectral')
        x0_mode: 'random_unit' or 'given'
        x0: Signal for x0_mode 'given'
        dense_max: Largest order solved densely by the null method
        include_timing: Measure wall time per method

    Returns:
        One TrialRecord per method, in the order given
    """
    stream = RngStream(master_seed, trial_id)
    ensemble = make_ensemble(
        stream, point.n, point.N, x0_mode=x0_mode,
        x0=None if x0 is None else np.asarray(x0, dtype=complex)
    )
    split = select_weak(ensemble, point.I_size)
    x0_norm = ensemble.x0_norm

    records = []
    for method in methods:
        start = time.perf_counter()
        try:
            if method == "null":
                estimate = null_vector(ensemble, split, dense_max=dense_max)
                cert = certify_estimate(ensemble, split, estimate)
                cert_lhs, cert_rhs = cert.lhs, cert.rhs
            elif method == "spectral":
                estimate = spectral_vector(ensemble)
                cert_lhs, cert_rhs = math.nan, math.nan
            else:
                raise ContractViolation(f"Unknown method '{method}'")
        except ContractViolation:
            raise
        except (PhasecoreError, np.linalg.LinAlgError) as e:
            logger.warning(f"Trial {trial_id} ({method}) failed: {str(e)}")
            records.append(_failed_record(point, trial_id, method, e, x0_norm))
            continue

        elapsed = (time.perf_counter() - start) * 1000.0 if include_timing else math.nan
        records.append(TrialRecord(
            trial_id=trial_id, seed_stream=trial_id, n=point.n, N=point.N,
            I_size=point.I_size, sigma=point.sigma, nu=point.nu, method=method,
            err_sq=estimate.err_sq, rel_err=estimate.rel_err,
            align_inner=estimate.align_inner, cert_lhs=cert_lhs, cert_rhs=cert_rhs,
            iterations=estimate.iterations, wall_time_ms=elapsed, status="ok",
            x0_norm=x0_norm
        ))
        logger.debug(
            f"Trial {trial_id} {method}: err_sq={estimate.err_sq:.6g}, "
            f"iterations={estimate.iterations}"
        )
    return records


def _trial_job(args: Tuple) -> List[TrialRecord]:
    point, trial_id, cfg = args
    return run_trial(
        point, trial_id, cfg.master_seed, cfg.methods, cfg.x0_mode, cfg.x0,
        cfg.dense_max, cfg.include_timing
    )


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> Tuple[List[TrialRecord], SweepSummary]:
    """
    Run trials_per_point trials at every point of the sweep and summarize.

    Trial ids are global, point_index · trials_per_point + k, and both
    methods of a trial share its ensemble.

    Args:
        cfg: Experiment configuration
        workers: Worker processes

    Returns:
        Tuple of (records sorted by point, method, trial_id; summary)
    """
    points = cfg.points()
    trials = cfg.trials_per_point
    logger.info(
        f"Starting sweep: {len(points)} points x {trials} trials x {len(cfg.methods)} methods "
        f"on {max(workers or 1, 1)} workers"
    )

    jobs = [(p, p.index * trials + k, cfg) for p in points for k in range(trials)]
    try:
        batches = parallel_map(_trial_job, jobs, workers)
    except Exception as e:
        logger.error(f"Sweep failed: {str(e)}", exc_info=True)
        raise

    order = {m: i for i, m in enumerate(cfg.methods)}
    records = sorted(
        (r for batch in batches for r in batch),
        key=lambda r: (r.trial_id // trials, order[r.method], r.trial_id)
    )
    summary = summarize(records, cfg)
    for row in summary.table.itertuples(index=False):
        logger.info(
            f"N={row.N} |I|={row.I_size} {row.method}: median={row.median:.6g} "
            f"({row.failed} failed)"
        )
    logger.info(f"Sweep completed: {len(records)} records, slopes {summary.slopes}")
    return records, summary


def records_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """TrialRecords as a DataFrame with one column per field."""
    columns = list(TrialRecord.__dataclass_fields__)
    return pd.DataFrame([asdict(r) for r in records], columns=columns)


def _theorem_rhs(cfg: ExperimentConfig, point: SweepPoint) -> float:
    try:
        params = cfg.bound_params(point)
    except ParameterError as e:
        logger.warning(f"No theorem bound at N={point.N}, |I|={point.I_size}: {str(e)}")
        return math.nan
    return math.nan if params is None else theorem_error_rhs(params)


def fit_slope(sigmas: Sequence[float], medians: Sequence[float]) -> float:
    """
    Least-squares slope of ln(median) against ln(σ).

    Points with a non-positive or non-finite median are skipped; fewer than
    two distinct σ values give NaN.
    """
    pairs = [(s, m) for s, m in zip(sigmas, medians) if m > 0 and math.isfinite(m)]
    if len({s for s, _ in pairs}) < 2:
        return math.nan
    x = np.log([s for s, _ in pairs])
    y = np.log([m for _, m in pairs])
    return float(np.polyfit(x, y, 1)[0])


def summarize(records: Sequence[TrialRecord], cfg: ExperimentConfig) -> SweepSummary:
    """
    Aggregate records per (point, method) on err_sq/‖x0‖⁴.

    Args:
        records: Trial records of the sweep
        cfg: The sweep's configuration

    Returns:
        SweepSummary
    """
    frame = records_frame(records)
    rows = []
    for point in cfg.points():
        rhs = _theorem_rhs(cfg, point)
        at_point = frame[frame["trial_id"] // cfg.trials_per_point == point.index]
        for method in cfg.methods:
            group = at_point[at_point["method"] == method]
            ok = group[group["status"] == "ok"]
            normalized = (ok["err_sq"] / ok["x0_norm"] ** 4).to_numpy(dtype=float)
            if normalized.size:
                median = float(np.median(normalized))
                mean = float(np.mean(normalized))
                p90 = float(np.percentile(normalized, 90))
            else:
                median = mean = p90 = math.nan
            rows.append({
                "N": point.N, "I_size": point.I_size, "sigma": point.sigma, "nu": point.nu,
                "method": method, "trials": int(len(group)),
                "failed": int(len(group) - len(ok)), "median": median, "mean": mean,
                "p90": p90, "theorem_rhs": rhs,
            })

    table = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    slopes = {}
    for method in cfg.methods:
        sub = table[table["method"] == method]
        slopes[method] = fit_slope(sub["sigma"].tolist(), sub["median"].tolist())
    return SweepSummary(table=table, slopes=slopes)


def certificate_violations(
    records: Sequence[TrialRecord], rtol: float = 1e-12
) -> List[TrialRecord]:
    """Null-method records whose certificate inequality fails beyond rtol."""
    return [
        r for r in records
        if r.method == "null" and r.ok and not r.cert_lhs <= r.cert_rhs * (1.0 + rtol)
    ]
