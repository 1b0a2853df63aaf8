"""Report persistence, tables and the schema contract."""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from core.report import (
    REPORT_FILE,
    SCHEMA_ID,
    TABLES_FILE,
    RunReport,
    emit_report,
    load_report,
    summary_table,
    trace_file,
)
from exceptions import ReportError

GOLDEN = json.loads((Path(__file__).parent / "golden" / "report_schema.json").read_text(encoding="utf-8"))


class TestEmit:
    def test_writes_report_tables_and_traces(self, planned_report, tmp_path):
        written = emit_report(planned_report, tmp_path / "out")
        names = [p.name for p in written]
        assert names == [REPORT_FILE, TABLES_FILE] + [trace_file(t) for t in (1, 2, 3)]
        assert all(p.is_file() for p in written)

    def test_round_trip(self, planned_report, tmp_path):
        emit_report(planned_report, tmp_path)
        again = load_report(tmp_path)
        assert again.to_dict() == planned_report.to_dict()
        assert again.feasible == planned_report.feasible

    def test_load_from_file_path(self, planned_report, tmp_path):
        emit_report(planned_report, tmp_path)
        assert load_report(tmp_path / REPORT_FILE).generated_at == planned_report.generated_at

    def test_trace_csv(self, planned_report, tmp_path):
        emit_report(planned_report, tmp_path)
        trace = pd.read_csv(tmp_path / trace_file(1))
        assert list(trace.columns) == ["iteration", "best_fitness", "mean_fitness"]
        assert trace["best_fitness"].is_monotonic_decreasing
        assert len(trace) == len(planned_report.level(1).trace)

    def test_unwritable_directory(self, planned_report, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(ReportError) as info:
            emit_report(planned_report, blocker / "out")
        assert info.value.path is not None

    def test_partial_report_is_emitted(self, tmp_path):
        partial = RunReport(config={"seed": 1}, failed_at="ingestion", error="grid file does not exist")
        written = emit_report(partial, tmp_path)
        assert [p.name for p in written] == [REPORT_FILE, TABLES_FILE]
        again = load_report(tmp_path)
        assert again.failed_at == "ingestion"
        assert not again.feasible


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ReportError):
            load_report(tmp_path / "nothing.json")

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / REPORT_FILE
        path.write_text(json.dumps({"schema": "other/v9"}), encoding="utf-8")
        with pytest.raises(ReportError, match="schema"):
            load_report(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / REPORT_FILE
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ReportError, match="JSON"):
            load_report(path)


class TestTables:
    def test_columns(self, planned_report):
        assert list(summary_table(planned_report).columns) == GOLDEN["table_columns"]

    def test_aggregate_rows(self, planned_report):
        table = summary_table(planned_report)
        rows = table[(table["section"] == "placement") & (table["case"] == "aggregate")]
        assert sorted(rows["location"].astype(int)) == sorted(planned_report.aggregate.branches)

    def test_one_cost_row_per_level_and_base(self, planned_report):
        table = summary_table(planned_report)
        costs = table[table["section"] == "reconfiguration"]
        assert len(costs) == 2 * len(planned_report.levels)

    def test_fault_rows_before_and_after(self, planned_report):
        table = summary_table(planned_report)
        faults = table[table["section"] == "fault"]
        assert len(faults) == 2 * len(planned_report.levels)
        for entry in planned_report.levels:
            t = entry.level.index
            before = faults[faults["case"] == f"level {t} without SFCL"]["worst_current_a"].item()
            after = faults[faults["case"] == f"level {t} with SFCL"]["worst_current_a"].item()
            assert after <= before


class TestSchema:
    def test_schema_id(self, planned_report):
        assert SCHEMA_ID == GOLDEN["schema"]
        assert planned_report.to_dict()["schema"] == GOLDEN["schema"]

    def test_top_level_keys(self, planned_report):
        assert sorted(planned_report.to_dict()) == GOLDEN["top_level_keys"]

    def test_level_keys(self, planned_report):
        for level in planned_report.to_dict()["levels"]:
            assert sorted(level) == GOLDEN["level_keys"]
            assert sorted(level["placement"]) == GOLDEN["placement_keys"]

    def test_device_keys(self, planned_report):
        for device in planned_report.to_dict()["aggregate"]["devices"]:
            assert sorted(device) == GOLDEN["device_keys"]
