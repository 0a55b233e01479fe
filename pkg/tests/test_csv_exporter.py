"""Tests for the versioned CSV writer and reader."""

import math

import pandas as pd
import pytest

from phasecore.bounds import BoundParams, theorem_prob_lower
from phasecore.csv_exporter import SCHEMA_LINE, CsvExporter, read_trials
from phasecore.errors import ContractViolation
from phasecore.harness import ExperimentConfig, IndexRule, run_sweep


def _same(a: float, b: float) -> bool:
    return (math.isnan(a) and math.isnan(b)) or a == b


@pytest.fixture(scope="module")
def sweep():
    cfg = ExperimentConfig(
        master_seed=3, n=4, N_list=(32, 64), I_size_rule=IndexRule("fixed", 12),
        trials_per_point=2, eps=0.5, delta=1.0, t=0.1, include_timing=True
    )
    return run_sweep(cfg)


class TestTrials:

    def test_round_trip(self, sweep, tmp_path):
        records, _ = sweep
        exporter = CsvExporter(str(tmp_path), {"output": {"include_timing": True}})
        path = exporter.write_trials(records, metadata={"seed": 3})

        parsed = read_trials(path)
        assert len(parsed) == len(records)
        for original, back in zip(records, parsed):
            for name in original.__dataclass_fields__:
                a, b = getattr(original, name), getattr(back, name)
                if isinstance(a, float):
                    assert _same(a, b), name
                else:
                    assert a == b, name

    def test_header_and_metadata(self, sweep, tmp_path):
        records, _ = sweep
        path = CsvExporter(str(tmp_path)).write_trials(records, metadata={"seed": 3})
        lines = open(path, encoding="utf-8").read().split("\n")
        assert lines[0] == SCHEMA_LINE
        assert lines[1].startswith("# version: ")
        assert lines[2] == "# seed: 3"
        assert lines[3].startswith("trial_id,seed_stream,n,N,I_size")

    def test_timing_column_is_opt_in(self, sweep, tmp_path):
        records, _ = sweep
        path = CsvExporter(str(tmp_path)).write_trials(records)
        assert "wall_time_ms" not in pd.read_csv(path, comment="#").columns
        assert all(math.isnan(r.wall_time_ms) for r in read_trials(path))

    def test_byte_identical_rewrite(self, sweep, tmp_path):
        records, _ = sweep
        first = CsvExporter(str(tmp_path / "a")).write_trials(records, metadata={"seed": 3})
        second = CsvExporter(str(tmp_path / "b")).write_trials(records, metadata={"seed": 3})
        assert open(first, "rb").read() == open(second, "rb").read()

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ContractViolation):
            read_trials(str(path))


class TestOtherTables:

    def test_summary_with_slopes(self, sweep, tmp_path):
        _, summary = sweep
        path = CsvExporter(str(tmp_path)).write_summary(summary)
        text = open(path, encoding="utf-8").read()
        assert "# slope.null: " in text
        table = pd.read_csv(path, comment="#", keep_default_na=False, na_values=["nan"])
        assert len(table) == 4
        assert list(table.columns[-4:]) == ["median", "mean", "p90", "theorem_rhs"]

    def test_bound_row(self, tmp_path):
        params = BoundParams(sigma=0.125, nu=0.5, eps=0.5, delta=1.0, t=0.1, N=4096)
        result = theorem_prob_lower(params)
        path = CsvExporter(str(tmp_path)).write_bound(params, result)
        table = pd.read_csv(path, comment="#", float_precision="round_trip")
        assert len(table) == 1
        assert table["prob_lower"][0] == result.prob_lower
        assert "# note: " in open(path, encoding="utf-8").read()

    def test_bound_without_N(self, tmp_path):
        params = BoundParams(sigma=0.1, nu=0.5, eps=0.5, delta=1.0, t=0.1)
        path = CsvExporter(str(tmp_path)).write_bound(params)
        table = pd.read_csv(path, comment="#")
        assert math.isnan(table["prob_lower"][0])
        assert table["err_rhs"][0] == pytest.approx(41.54, abs=0.01)
