"""
CSV Exporter Module
Writes trial records, sweep summaries, bound evaluations and check outcomes
as versioned CSV files, and reads trial records back.
"""

import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from . import __version__
from .bounds import (
    COUNT_TERM_NOTE,
    BoundParams,
    BoundResult,
    clamp_probability,
    theorem_error_rhs,
)
from .errors import ContractViolation
from .harness import SweepSummary, TrialRecord, records_frame

logger = logging.getLogger(__name__)

SCHEMA_LINE = "# phasecore-csv v1"
FLOAT_FORMAT = "%.17g"


class CsvExporter:
    """
    Writes phasecore CSV files: a schema line, '# key: value' metadata,
    then a header row and data with 17 significant digits.
    """

    def __init__(self, output_dir: str = "output", config: Optional[Dict[str, Any]] = None):
        """
        Initialize the CsvExporter.

        Args:
            output_dir: Directory for output CSV files
            config: Configuration dictionary; 'output.include_timing' is honored
        """
        self.output_dir = Path(output_dir)
        self.config = config or {}
        self.include_timing = bool(self.config.get('output', {}).get('include_timing', False))

        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"CsvExporter initialized with output directory: {output_dir}")

    def _header(self, metadata: Optional[Dict[str, Any]]) -> str:
        lines = [SCHEMA_LINE, f"# version: {__version__}"]
        for key, value in (metadata or {}).items():
            lines.append(f"# {key}: {json.dumps(value, sort_keys=True)}")
        return "\n".join(lines) + "\n"

    def _write(self, df: pd.DataFrame, filename: str, metadata: Optional[Dict[str, Any]]) -> str:
        output_path = self.output_dir / filename
        try:
            with open(output_path, 'w', encoding='utf-8', newline='') as f:
                f.write(self._header(metadata))
                df.to_csv(
                    f, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n"
                )
        except Exception as e:
            logger.error(f"Error writing CSV {output_path}: {str(e)}", exc_info=True)
            raise

        logger.info(f"Wrote {len(df)} rows to {output_path}")
        return str(output_path)

    def write_trials(
        self,
        records: Sequence[TrialRecord],
        filename: str = "trials.csv",
        metadata: Optional[Dict[str, Any]] = None
    ) -> str:
        """
        Write one row per trial record.

        Args:
            records: Trial records in output order
            filename: File name inside the output directory
            metadata: Extra '# key: value' lines (seed, config echo)

        Returns:
            Path to the written file
        """
        df = records_frame(records)
        if not self.include_timing:
            df = df.drop(columns=["wall_time_ms"])
        return self._write(df, filename, metadata)

    def write_summary(
        self,
        summary: SweepSummary,
        filename: str = "summary.csv",
        metadata: Optional[Dict[str, Any]] = None
    ) -> str:
        """Write the per-point summary; fitted slopes go into the metadata lines."""
        meta = dict(metadata or {})
        for method, slope in summary.slopes.items():
            meta[f"slope.{method}"] = None if math.isnan(slope) else slope
        return self._write(summary.table, filename, meta)

    def write_bound(
        self,
        params: BoundParams,
        result: Optional[BoundResult] = None,
        filename: str = "bound.csv",
        metadata: Optional[Dict[str, Any]] = None
    ) -> str:
        """Write a one-row table of the parameters and the bound outputs."""
        row: Dict[str, Any] = asdict(params)
        row["err_rhs"] = theorem_error_rhs(params)
        if result is None:
            for key in ("tail_term", "count_term", "q_term", "prob_lower", "prob_lower_clamped"):
                row[key] = math.nan
            row["clamped"] = False
            row["small_sigma_warning"] = False
        else:
            clamped, flagged = clamp_probability(result.prob_lower)
            row.update({
                "tail_term": result.tail_term,
                "count_term": result.count_term,
                "q_term": result.q_term,
                "prob_lower": result.prob_lower,
                "prob_lower_clamped": clamped,
                "clamped": flagged,
                "small_sigma_warning": result.small_sigma_warning,
            })
        meta = dict(metadata or {})
        if result is not None:
            meta["note"] = COUNT_TERM_NOTE
        return self._write(pd.DataFrame([row]), filename, meta)

    def write_checks(
        self,
        outcomes: Sequence[Any],
        filename: str = "validate.csv",
        metadata: Optional[Dict[str, Any]] = None
    ) -> str:
        """Write validator outcomes, one row per comparison."""
        df = pd.DataFrame([asdict(o) for o in outcomes])
        return self._write(df, filename, metadata)


def read_trials(path: str) -> List[TrialRecord]:
    """
    Parse a trials CSV back into TrialRecords.

    Args:
        path: File written by CsvExporter.write_trials

    Returns:
        List of TrialRecord in file order
    """
    with open(path, 'r', encoding='utf-8') as f:
        first = f.readline().rstrip("\n")
    if first != SCHEMA_LINE:
        raise ContractViolation(f"{path} is not a phasecore v1 CSV (first line '{first}')")

    # "null" is a method name, not a missing value
    df = pd.read_csv(
        path, comment='#', float_precision="round_trip", keep_default_na=False, na_values=["nan"]
    )
    if "wall_time_ms" not in df.columns:
        df["wall_time_ms"] = math.nan

    int_fields = {"trial_id", "seed_stream", "n", "N", "I_size", "iterations"}
    str_fields = {"method", "status"}
    records = []
    for row in df.to_dict(orient="records"):
        values = {}
        for name in TrialRecord.__dataclass_fields__:
            value = row[name]
            if name in int_fields:
                values[name] = int(value)
            elif name in str_fields:
                values[name] = str(value)
            else:
                values[name] = float(value)
        records.append(TrialRecord(**values))
    logger.debug(f"Read {len(records)} trial records from {path}")
    return records
